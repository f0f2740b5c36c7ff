#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tbs/pde.hpp"

namespace tbs {

using GradientFunction = std::function<std::array<double, kMaxDim>(const std::array<double, kMaxDim>&)>;

/// Reference solution for error norms: an analytic function (with gradient for H1)
/// or a spline, typically from a finer grid.
struct Reference {
    PointFunction value;
    GradientFunction gradient;
    const SplineField* spline = nullptr;

    static Reference analytic(PointFunction v, GradientFunction g = {}) { return {std::move(v), std::move(g), nullptr}; }
    static Reference fine(const SplineField& s) { return {{}, {}, &s}; }
    static Reference zero();
};

/// ||f - ref||_L2 over the occupied cells of `domain`. Each cell is split into
/// 2 * subdivisions pieces per axis (half-cells keep even-degree pieces polynomial);
/// pass the grid ratio when the reference is a finer spline.
double l2_norm(const SplineField& f, const Reference& ref, const Domain& domain, int subdivisions = 1);

/// Full H1 norm sqrt(||e||^2 + ||grad e||^2). Degree 0 fields have no gradient.
double h1_norm(const SplineField& f, const Reference& ref, const Domain& domain, int subdivisions = 1);

/// Both norms in one quadrature pass.
std::array<double, 2> error_norms(const SplineField& f, const Reference& ref, const Domain& domain,
                                  int subdivisions = 1);

struct ErrorReport {
    int degree = 1;
    double h = 1.0;
    Index dof = 0;
    double l2_error = 0.0;
    double h1_error = 0.0;
};

struct DegreeCurve {
    int degree = 1;
    std::vector<ErrorReport> levels;
    double l2_order = 0.0;
    double h1_order = 0.0;
    bool monotone = true;  // errors decrease with h on every level
};

enum class StudyFamily {
    Diffusion1D,  // -(u')' + mu u = exp(-(x/2)^2) on [-25, 25], Robin 2 D u'.n + u = 0
    Cosine2D,     // u = cos(pi x / L) cos(pi y / L) on [0, L]^2, Neumann
    Polynomial,   // 1-D u = 1 + x (+ x^2 for nb >= 2): reproduced exactly
};

StudyFamily parse_study_family(const std::string& name);
const char* to_string(StudyFamily f);

struct StudyOptions {
    double diffusion = 1.0;
    double absorption = 0.1;  // Diffusion1D; Cosine2D uses 1
    double gamma = 1.0;
    double half_width = 25.0;   // Diffusion1D domain [-w, w]
    double cosine_length = 4.0;  // Cosine2D side L
    int reference_degree = 5;
    int reference_refinement = 16;  // reference step = finest step / this
    SolveConfig solver = [] {
        SolveConfig c;
        c.method = SolveMethod::Direct;
        return c;
    }();
    Strategy strategy = Strategy::OnTheFly;
};

struct ConvergenceStudy {
    StudyFamily family = StudyFamily::Diffusion1D;
    std::vector<DegreeCurve> curves;
    /// Estimated L2 error of the fine reference (difference to a half-resolution reference); 0 if analytic.
    double reference_error = 0.0;
    std::vector<std::string> notes;
};

/// Least-squares slope of log(error) against log(h).
double fit_order(const std::vector<double>& h, const std::vector<double>& error);

/// Error curves for each degree over steps h = 2^-level.
ConvergenceStudy run_convergence(StudyFamily family, const std::vector<int>& degrees, const std::vector<int>& levels,
                                 const StudyOptions& options = {});

/// CSV rows: degree, h, dof, l2, h1, l2_order, h1_order.
std::string to_csv(const ConvergenceStudy& study);

/// Gnuplot script plotting the CSV written to `csv_path` on log-log axes.
std::string gnuplot_script(const ConvergenceStudy& study, const std::string& csv_path);

}  // namespace tbs
