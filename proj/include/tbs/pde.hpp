#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "tbs/domain.hpp"
#include "tbs/operator.hpp"
#include "tbs/solver.hpp"

namespace tbs {

enum class Precision { Single, Double };
Precision parse_precision(const std::string& name);
const char* to_string(Precision p);

using PointFunction = std::function<double(const std::array<double, kMaxDim>&)>;

/// A coefficient or source field given as a constant, node samples, or a function of position.
struct FieldInput {
    enum class Kind { Constant, Samples, Analytic };
    Kind kind = Kind::Constant;
    double value = 0.0;
    CoeffTensor samples;
    PointFunction function;
    std::string tag;

    static FieldInput constant(double v);
    static FieldInput sampled(CoeffTensor node_samples);
    static FieldInput analytic(PointFunction f, std::string tag = "analytic");
};

enum class BCKind { Neumann, Robin, DirichletPenalty, Cauchy, Mixed };
BCKind parse_bc_kind(const std::string& name);

/// Neumann: D grad(phi).n = 0. Robin: 2 gamma D grad(phi).n + phi = g.
/// DirichletPenalty: phi = g imposed through a surface weight 1/epsilon (epsilon <= 0 selects 1e-4 h).
struct BoundaryCondition {
    BCKind kind = BCKind::Neumann;
    double gamma = 1.0;
    double g = 0.0;
    double epsilon = 0.0;

    static BoundaryCondition neumann() { return {}; }
    static BoundaryCondition robin(double gamma, double g = 0.0) { return {BCKind::Robin, gamma, g, 0.0}; }
    static BoundaryCondition penalty(double g, double epsilon = 0.0) { return {BCKind::DirichletPenalty, 1.0, g, epsilon}; }
};

enum class SourceMode { Interpolation, Projection };

struct ProblemSpec {
    Domain domain;
    int nb = 3;
    int np = -1;  // -1: same as nb
    int ns = -1;
    FieldInput diffusion = FieldInput::constant(1.0);
    FieldInput absorption = FieldInput::constant(0.0);
    FieldInput source = FieldInput::constant(0.0);
    /// Box domains: one condition per axis and side. Mask domains use `mask_bc` everywhere.
    std::array<std::array<BoundaryCondition, 2>, kMaxDim> faces{};
    BoundaryCondition mask_bc{};
    SourceMode source_mode = SourceMode::Interpolation;
    Precision precision = Precision::Double;
    Strategy strategy = Strategy::OnTheFly;

    explicit ProblemSpec(Domain d) : domain(std::move(d)) {}
    [[nodiscard]] int param_degree() const { return np < 0 ? nb : np; }
    [[nodiscard]] int source_degree() const { return ns < 0 ? nb : ns; }
    void set_all_faces(const BoundaryCondition& bc);
    void validate() const;
};

/// Spline-space inputs: diffusion and absorption at degree np, source at degree ns.
struct InputFields {
    SplineField d, mu, q;
    Index clamped_d = 0, clamped_mu = 0;
};

InputFields transform_inputs(const ProblemSpec& spec);

/// Surface weights and data of every boundary face.
SurfaceModel realize_bc(const ProblemSpec& spec);

/// Load vector t_l on the padded basis grid (inactive entries zero).
Eigen::VectorXd assemble_rhs(const Domain& domain, int nb, const SplineField& q, const SurfaceModel& surface,
                             const NodeClassification& nodes);

template <typename Scalar>
struct AssembledSystem {
    FormData form;
    InputFields inputs;
    std::unique_ptr<SystemOperator<Scalar>> op;
    typename SystemOperator<Scalar>::Vector rhs;
};

template <typename Scalar>
AssembledSystem<Scalar> assemble_system(const ProblemSpec& spec, double memory_budget = kDefaultMemoryBudget);

struct ProblemSolution {
    SplineField solution;      // degree nb on the padded grid
    CoeffTensor node_samples;  // solution sampled at grid nodes
    SolveReport report;
    NodeClassification nodes;
    Index clamped_d = 0, clamped_mu = 0;
    double assemble_seconds = 0.0;
};

ProblemSolution solve_problem(const ProblemSpec& spec, const SolveConfig& config,
                              double memory_budget = kDefaultMemoryBudget);

/// Solution of the problem on a grid coarsened by `factor`, prolongated to the fine
/// padded coefficient grid. `notes` receives padding remarks.
Eigen::VectorXd coarse_initialize(const ProblemSpec& spec, const InputFields& fine_inputs, int factor,
                                  const SolveConfig& config, int* coarse_iterations = nullptr,
                                  std::vector<std::string>* notes = nullptr);

}  // namespace tbs
