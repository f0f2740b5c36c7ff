#include "tbs/verify.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "tbs/kernels.hpp"
#include "tbs/parallel.hpp"

namespace tbs {

Reference Reference::zero() {
    return analytic([](const std::array<double, kMaxDim>&) { return 0.0; },
                    [](const std::array<double, kMaxDim>&) { return std::array<double, kMaxDim>{0.0, 0.0, 0.0}; });
}

namespace {

constexpr int kNormPoints = 6;

struct NormSums {
    double l2 = 0.0;
    double grad = 0.0;
};

NormSums integrate_error(const SplineField& f, const Reference& ref, const Domain& domain, int subdivisions,
                         bool with_gradient) {
    if (subdivisions < 1) throw Error(ErrorKind::Configuration, "quadrature subdivisions must be positive");
    if (!ref.spline && !ref.value) throw Error(ErrorKind::Misuse, "reference has no value");
    if (with_gradient) {
        if (f.degree < 1) throw Error(ErrorKind::Smoothness, "H1 norm of a degree-0 spline");
        if (!ref.spline && !ref.gradient) throw Error(ErrorKind::Misuse, "reference has no gradient");
        if (ref.spline && ref.spline->degree < 1) throw Error(ErrorKind::Smoothness, "H1 norm of a degree-0 reference");
    }
    const Grid& g = domain.grid();
    const Extents& ce = domain.cells();
    const QuadratureRule rule = gauss_rule(kNormPoints);
    const int pieces = 2 * subdivisions;
    // Points and weights within one cell, unit coordinates, per axis.
    std::array<std::vector<double>, kMaxDim> u, w;
    for (int a = 0; a < kMaxDim; ++a) {
        if (a >= g.dim) {
            u[a] = {0.0};
            w[a] = {1.0};
            continue;
        }
        for (int p = 0; p < pieces; ++p)
            for (int q = 0; q < rule.size(); ++q) {
                u[a].push_back((p + rule.nodes[q]) / pieces);
                w[a].push_back(rule.weights[q] / pieces * g.step[a]);
            }
    }
    auto cell_sum = [&](Index c, bool gradient_part) {
        const int i = static_cast<int>(c / (static_cast<Index>(ce.n[1]) * ce.n[2]));
        const int j = static_cast<int>((c / ce.n[2]) % ce.n[1]);
        const int k = static_cast<int>(c % ce.n[2]);
        if (!domain.occupied(i, j, k)) return 0.0;
        const std::array<int, kMaxDim> cell{i, j, k};
        double s = 0.0;
        std::array<double, kMaxDim> x{};
        for (std::size_t a0 = 0; a0 < u[0].size(); ++a0)
            for (std::size_t a1 = 0; a1 < u[1].size(); ++a1)
                for (std::size_t a2 = 0; a2 < u[2].size(); ++a2) {
                    const std::array<double, kMaxDim> uu{u[0][a0], u[1][a1], u[2][a2]};
                    for (int a = 0; a < kMaxDim; ++a) x[a] = a < g.dim ? g.coordinate(a, cell[a] + uu[a]) : 0.0;
                    const double wt = w[0][a0] * w[1][a1] * w[2][a2];
                    if (!gradient_part) {
                        const double r = ref.spline ? ref.spline->evaluate(x) : ref.value(x);
                        const double e = f.evaluate(x) - r;
                        s += wt * e * e;
                    } else {
                        const auto gf = f.gradient(x);
                        const auto gr = ref.spline ? ref.spline->gradient(x) : ref.gradient(x);
                        for (int a = 0; a < g.dim; ++a) s += wt * (gf[a] - gr[a]) * (gf[a] - gr[a]);
                    }
                }
        return s;
    };
    NormSums out;
    out.l2 = deterministic_sum<double>(ce.size(), 0, [&](Index c) { return cell_sum(c, false); });
    if (with_gradient) out.grad = deterministic_sum<double>(ce.size(), 0, [&](Index c) { return cell_sum(c, true); });
    return out;
}

}  // namespace

double l2_norm(const SplineField& f, const Reference& ref, const Domain& domain, int subdivisions) {
    return std::sqrt(integrate_error(f, ref, domain, subdivisions, false).l2);
}

double h1_norm(const SplineField& f, const Reference& ref, const Domain& domain, int subdivisions) {
    const NormSums s = integrate_error(f, ref, domain, subdivisions, true);
    return std::sqrt(s.l2 + s.grad);
}

std::array<double, 2> error_norms(const SplineField& f, const Reference& ref, const Domain& domain, int subdivisions) {
    const NormSums s = integrate_error(f, ref, domain, subdivisions, f.degree >= 1);
    return {std::sqrt(s.l2), std::sqrt(s.l2 + s.grad)};
}

StudyFamily parse_study_family(const std::string& name) {
    if (name == "diffusion1d") return StudyFamily::Diffusion1D;
    if (name == "cosine2d") return StudyFamily::Cosine2D;
    if (name == "poly" || name == "polynomial") return StudyFamily::Polynomial;
    throw Error(ErrorKind::Configuration, "unknown study family '" + name + "'");
}

const char* to_string(StudyFamily f) {
    switch (f) {
        case StudyFamily::Diffusion1D: return "diffusion1d";
        case StudyFamily::Cosine2D: return "cosine2d";
        case StudyFamily::Polynomial: return "poly";
    }
    return "?";
}

double fit_order(const std::vector<double>& h, const std::vector<double>& error) {
    if (h.size() != error.size() || h.size() < 2) throw Error(ErrorKind::Misuse, "order fit needs matching samples");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double x = std::log(h[i]);
        const double y = std::log(std::max(error[i], 1e-300));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

namespace {

ProblemSpec diffusion1d_problem(double h, int nb, const StudyOptions& o) {
    const int cells = static_cast<int>(std::lround(2.0 * o.half_width / h));
    ProblemSpec spec(Domain::box(Grid(1, {cells + 1, 1, 1}, {h, 1, 1}, {-o.half_width, 0, 0})));
    spec.nb = nb;
    spec.diffusion = FieldInput::constant(o.diffusion);
    spec.absorption = FieldInput::constant(o.absorption);
    spec.source = FieldInput::analytic([](const std::array<double, kMaxDim>& x) { return std::exp(-0.25 * x[0] * x[0]); },
                                       "exp(-(x/2)^2)");
    spec.set_all_faces(BoundaryCondition::robin(o.gamma, 0.0));
    spec.strategy = o.strategy;
    return spec;
}

ProblemSpec cosine2d_problem(double h, int nb, const StudyOptions& o) {
    const double L = o.cosine_length;
    const int cells = static_cast<int>(std::lround(L / h));
    ProblemSpec spec(Domain::box(Grid(2, {cells + 1, cells + 1, 1}, {h, h, 1})));
    spec.nb = nb;
    const double k = std::numbers::pi / L;
    spec.diffusion = FieldInput::constant(o.diffusion);
    spec.absorption = FieldInput::constant(1.0);
    const double factor = 1.0 + 2.0 * o.diffusion * k * k;
    spec.source = FieldInput::analytic(
        [=](const std::array<double, kMaxDim>& x) { return factor * std::cos(k * x[0]) * std::cos(k * x[1]); },
        "manufactured cosine");
    spec.set_all_faces(BoundaryCondition::neumann());
    spec.strategy = o.strategy;
    return spec;
}

Reference cosine2d_reference(const StudyOptions& o) {
    const double k = std::numbers::pi / o.cosine_length;
    return Reference::analytic(
        [=](const std::array<double, kMaxDim>& x) { return std::cos(k * x[0]) * std::cos(k * x[1]); },
        [=](const std::array<double, kMaxDim>& x) {
            return std::array<double, kMaxDim>{-k * std::sin(k * x[0]) * std::cos(k * x[1]),
                                               -k * std::cos(k * x[0]) * std::sin(k * x[1]), 0.0};
        });
}

// u = 1 + x + c x^2 on [0, 2] with Robin data matching u; -u'' = -2c.
ProblemSpec poly_problem(double h, int nb, const StudyOptions& o) {
    const double c = nb >= 2 ? 1.0 : 0.0;
    const int cells = static_cast<int>(std::lround(2.0 / h));
    ProblemSpec spec(Domain::box(Grid(1, {cells + 1, 1, 1}, {h, 1, 1})));
    spec.nb = nb;
    spec.diffusion = FieldInput::constant(1.0);
    spec.absorption = FieldInput::constant(0.0);
    spec.source = FieldInput::constant(-2.0 * c);
    const double gm = o.gamma;
    // 2 gamma u'.n + u = g; outward normal -1 at x = 0, +1 at x = 2.
    spec.faces[0][0] = BoundaryCondition::robin(gm, -2.0 * gm * 1.0 + 1.0);
    spec.faces[0][1] = BoundaryCondition::robin(gm, 2.0 * gm * (1.0 + 4.0 * c) + 3.0 + 4.0 * c);
    spec.strategy = o.strategy;
    return spec;
}

Reference poly_reference(int nb) {
    const double c = nb >= 2 ? 1.0 : 0.0;
    return Reference::analytic([=](const std::array<double, kMaxDim>& x) { return 1.0 + x[0] + c * x[0] * x[0]; },
                               [=](const std::array<double, kMaxDim>& x) {
                                   return std::array<double, kMaxDim>{1.0 + 2.0 * c * x[0], 0.0, 0.0};
                               });
}

}  // namespace

ConvergenceStudy run_convergence(StudyFamily family, const std::vector<int>& degrees, const std::vector<int>& levels,
                                 const StudyOptions& o) {
    if (levels.size() < 3) throw Error(ErrorKind::Configuration, "a convergence study needs at least 3 levels");
    if (degrees.empty()) throw Error(ErrorKind::Configuration, "a convergence study needs a degree");
    for (int n : degrees) {
        check_degree(n);
        if (n < 1) throw Error(ErrorKind::Smoothness, "H1 errors need degree >= 1");
    }
    ConvergenceStudy study;
    study.family = family;

    // Fine spline reference for the 1-D diffusion family.
    SplineField reference;
    int finest = levels[0];
    for (int l : levels) finest = std::max(finest, l);
    const double h_ref = std::ldexp(1.0, -finest) / o.reference_refinement;
    if (family == StudyFamily::Diffusion1D) {
        reference = solve_problem(diffusion1d_problem(h_ref, o.reference_degree, o), o.solver).solution;
        const SplineField half =
            solve_problem(diffusion1d_problem(2.0 * h_ref, o.reference_degree, o), o.solver).solution;
        const Domain ref_domain = diffusion1d_problem(2.0 * h_ref, o.reference_degree, o).domain;
        study.reference_error = l2_norm(half, Reference::fine(reference), ref_domain, 2);
        std::ostringstream note;
        note << "reference: degree " << o.reference_degree << ", h = " << h_ref
             << ", estimated L2 error <= " << study.reference_error;
        study.notes.push_back(note.str());
    }

    for (int nb : degrees) {
        DegreeCurve curve;
        curve.degree = nb;
        std::vector<double> hs, l2, h1;
        for (int level : levels) {
            const double h = std::ldexp(1.0, -level);
            ProblemSpec spec = family == StudyFamily::Diffusion1D ? diffusion1d_problem(h, nb, o)
                               : family == StudyFamily::Cosine2D  ? cosine2d_problem(h, nb, o)
                                                                  : poly_problem(h, nb, o);
            const ProblemSolution sol = solve_problem(spec, o.solver);
            if (o.solver.method == SolveMethod::Pcg && !sol.report.converged) {
                study.notes.push_back("degree " + std::to_string(nb) + " h " + std::to_string(h) +
                                      ": solver did not converge");
            }
            std::array<double, 2> e{};
            if (family == StudyFamily::Diffusion1D) {
                const int ratio = static_cast<int>(std::lround(h / h_ref));
                e = error_norms(sol.solution, Reference::fine(reference), spec.domain, ratio);
            } else if (family == StudyFamily::Cosine2D) {
                e = error_norms(sol.solution, cosine2d_reference(o), spec.domain);
            } else {
                e = error_norms(sol.solution, poly_reference(nb), spec.domain);
            }
            curve.levels.push_back({nb, h, sol.nodes.active(), e[0], e[1]});
            hs.push_back(h);
            l2.push_back(e[0]);
            h1.push_back(e[1]);
        }
        for (std::size_t i = 1; i < l2.size(); ++i) {
            if (!(l2[i] < l2[i - 1]) || !(h1[i] < h1[i - 1])) curve.monotone = false;
        }
        if (!curve.monotone && family != StudyFamily::Polynomial) {
            study.notes.push_back("degree " + std::to_string(nb) + ": error does not decrease monotonically");
        }
        curve.l2_order = fit_order(hs, l2);
        curve.h1_order = fit_order(hs, h1);
        study.curves.push_back(std::move(curve));
    }
    if (family == StudyFamily::Diffusion1D && !study.curves.empty()) {
        double coarsest = 0.0;
        for (const auto& c : study.curves) coarsest = std::max(coarsest, c.levels.front().l2_error);
        if (!(study.reference_error * 100.0 <= coarsest)) {
            study.notes.push_back("reference error is not 2 orders below the coarsest measured error");
        }
    }
    return study;
}

std::string to_csv(const ConvergenceStudy& study) {
    std::ostringstream os;
    os << std::setprecision(10);
    os << "degree,h,dof,l2,h1,l2_order,h1_order\n";
    for (const auto& c : study.curves)
        for (const auto& r : c.levels)
            os << r.degree << ',' << r.h << ',' << r.dof << ',' << r.l2_error << ',' << r.h1_error << ',' << c.l2_order
               << ',' << c.h1_order << '\n';
    return os.str();
}

std::string gnuplot_script(const ConvergenceStudy& study, const std::string& csv_path) {
    std::ostringstream os;
    os << "set datafile separator ','\nset logscale xy\nset xlabel 'h'\nset ylabel 'error'\nset key left top\n";
    os << "plot ";
    bool first = true;
    for (const auto& c : study.curves) {
        for (int col : {4, 5}) {
            if (!first) os << ", \\\n     ";
            first = false;
            os << "'" << csv_path << "' every ::1 using ($1==" << c.degree << " ? $2 : 1/0):" << col
               << " with linespoints title 'n=" << c.degree << (col == 4 ? " L2" : " H1") << "'";
        }
    }
    os << '\n';
    return os.str();
}

}  // namespace tbs
