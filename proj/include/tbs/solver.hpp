#pragma once

#include <string>
#include <vector>

#include "tbs/operator.hpp"

namespace tbs {

enum class Preconditioner { None, Jacobi };
enum class SolveMethod { Pcg, Direct };

Preconditioner parse_preconditioner(const std::string& name);
SolveMethod parse_solve_method(const std::string& name);

struct SolveConfig {
    double tol = 1e-8;
    int max_iter = 1000;
    Preconditioner precond = Preconditioner::Jacobi;
    SolveMethod method = SolveMethod::Pcg;
    int coarse_factor = 0;  // 0 disables coarse-grid initialization
    bool record_history = false;

    void validate() const;
};

struct SolveReport {
    int iterations = 0;
    bool converged = false;
    double relative_residual = 0.0;
    std::vector<double> residual_history;  // relative residual after each iteration (index 0 = start)
    std::vector<double> energy_history;    // 0.5 x'Ax - b'x
    double seconds = 0.0;
    OpStats operator_stats;
    int coarse_iterations = 0;
    std::vector<std::string> notes;
};

/// Conjugate gradients on the operator. `x` carries the initial guess in and the
/// solution out; inactive entries stay zero.
template <typename Scalar>
SolveReport pcg(const SystemOperator<Scalar>& op, const typename SystemOperator<Scalar>::Vector& b,
                typename SystemOperator<Scalar>::Vector& x, const SolveConfig& config);

/// Sparse LDL^T solve of the element-assembled system in double precision.
SolveReport direct_solve(const FormData& form, const Eigen::VectorXd& b, Eigen::VectorXd& x);

}  // namespace tbs
