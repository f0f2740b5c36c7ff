#pragma once

// Brute-force Galerkin assembly by tensor Gauss quadrature over every occupied
// cell, using the closed-form B-spline and Golub-Welsch rules from oracle.hpp.

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "oracle.hpp"
#include "tbs/assembly.hpp"
#include "tbs/domain.hpp"

namespace oracle {

struct DenseSystem {
    tbs::Extents extents;  // padded coefficient grid
    int pad = 0;
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
};

inline double field_value(const tbs::SplineField& f, const std::array<double, 3>& u) {
    double s = 0.0;
    const auto& e = f.coeffs.extents;
    for (int i = 0; i < e.n[0]; ++i) {
        const double w0 = f.grid.dim > 0 ? bspline(f.degree, u[0] - (i - f.pad)) : 1.0;
        if (w0 == 0.0) continue;
        for (int j = 0; j < e.n[1]; ++j) {
            const double w1 = f.grid.dim > 1 ? bspline(f.degree, u[1] - (j - f.pad)) : 1.0;
            if (w1 == 0.0) continue;
            for (int k = 0; k < e.n[2]; ++k) {
                const double w2 = f.grid.dim > 2 ? bspline(f.degree, u[2] - (k - f.pad)) : 1.0;
                s += w0 * w1 * w2 * f.coeffs(i, j, k);
            }
        }
    }
    return s;
}

/// Quadrature points (unit coordinates) and weights (unit measure) for a box of
/// cells, half-cell split on each listed axis.
inline void box_points(const std::array<int, 3>& cell, int dim, const std::array<int, 3>& fixed_axis_value,
                       int fixed_axis, int count, std::vector<std::array<double, 3>>& pts, std::vector<double>& wts) {
    const Rule lo = gauss(count, 0.0, 0.5);
    const Rule hi = gauss(count, 0.5, 1.0);
    std::array<std::vector<double>, 3> x, w;
    for (int a = 0; a < 3; ++a) {
        if (a >= dim) {
            x[a] = {0.0};
            w[a] = {1.0};
        } else if (a == fixed_axis) {
            x[a] = {double(fixed_axis_value[a])};
            w[a] = {1.0};
        } else {
            for (const Rule* r : {&lo, &hi})
                for (int q = 0; q < count; ++q) {
                    x[a].push_back(cell[a] + r->x[q]);
                    w[a].push_back(r->w[q]);
                }
        }
    }
    for (std::size_t i = 0; i < x[0].size(); ++i)
        for (std::size_t j = 0; j < x[1].size(); ++j)
            for (std::size_t k = 0; k < x[2].size(); ++k) {
                pts.push_back({x[0][i], x[1][j], x[2][k]});
                wts.push_back(w[0][i] * w[1][j] * w[2][k]);
            }
}

inline DenseSystem assemble_dense(const tbs::Domain& domain, int nb, const tbs::SplineField& d,
                                  const tbs::SplineField& mu, const tbs::SplineField* q,
                                  const tbs::SurfaceModel& surface, int count = 7) {
    const tbs::Grid& g = domain.grid();
    DenseSystem s;
    s.pad = nb / 2;
    s.extents = tbs::coefficient_extents(g, nb);
    const auto N = s.extents.size();
    s.A = Eigen::MatrixXd::Zero(N, N);
    s.b = Eigen::VectorXd::Zero(N);
    double vol = 1.0;
    for (int a = 0; a < g.dim; ++a) vol *= g.step[a];

    struct Active {
        tbs::Index idx;
        double v;
        std::array<double, 3> grad;
    };
    auto basis_at = [&](const std::array<double, 3>& u) {
        std::vector<Active> out;
        for (tbs::Index p = 0; p < N; ++p) {
            std::array<int, 3> pi{int(p / (s.extents.n[1] * s.extents.n[2])), int(p / s.extents.n[2] % s.extents.n[1]),
                                  int(p % s.extents.n[2])};
            std::array<double, 3> val{1, 1, 1}, der{0, 0, 0};
            bool zero = false;
            for (int a = 0; a < g.dim; ++a) {
                const double t = u[a] - (pi[a] - s.pad);
                if (std::abs(t) >= 0.5 * (nb + 1)) {
                    zero = true;
                    break;
                }
                val[a] = bspline(nb, t);
                der[a] = nb > 0 ? bspline_derivative(nb, t, 1) / g.step[a] : 0.0;
            }
            if (zero) continue;
            Active act{p, val[0] * val[1] * val[2], {0, 0, 0}};
            for (int a = 0; a < g.dim; ++a) {
                double gp = der[a];
                for (int b = 0; b < g.dim; ++b)
                    if (b != a) gp *= val[b];
                act.grad[a] = gp;
            }
            out.push_back(act);
        }
        return out;
    };

    const tbs::Extents& ce = domain.cells();
    for (int i = 0; i < ce.n[0]; ++i)
        for (int j = 0; j < ce.n[1]; ++j)
            for (int k = 0; k < ce.n[2]; ++k) {
                if (!domain.occupied(i, j, k)) continue;
                const std::array<int, 3> cell{i, j, k};
                std::vector<std::array<double, 3>> pts;
                std::vector<double> wts;
                box_points(cell, g.dim, {0, 0, 0}, -1, count, pts, wts);
                for (std::size_t qi = 0; qi < pts.size(); ++qi) {
                    const auto& u = pts[qi];
                    const double wq = wts[qi] * vol;
                    const double dv = field_value(d, u), mv = field_value(mu, u);
                    const double qv = q ? field_value(*q, u) : 0.0;
                    const auto act = basis_at(u);
                    for (const auto& r : act) {
                        s.b[r.idx] += wq * qv * r.v;
                        for (const auto& c : act) {
                            double gg = 0.0;
                            for (int a = 0; a < 3; ++a) gg += r.grad[a] * c.grad[a];
                            s.A(r.idx, c.idx) += wq * (dv * gg + mv * r.v * c.v);
                        }
                    }
                }
                for (const auto& f : tbs::boundary_faces(domain, surface, cell)) {
                    std::array<int, 3> fixed{0, 0, 0};
                    fixed[f.axis] = cell[f.axis] + f.side;
                    std::vector<std::array<double, 3>> fp;
                    std::vector<double> fw;
                    box_points(cell, g.dim, fixed, f.axis, count, fp, fw);
                    double area = 1.0;
                    for (int a = 0; a < g.dim; ++a)
                        if (a != f.axis) area *= g.step[a];
                    for (std::size_t qi = 0; qi < fp.size(); ++qi) {
                        const auto act = basis_at(fp[qi]);
                        const double wq = fw[qi] * area;
                        for (const auto& r : act) {
                            s.b[r.idx] += wq * f.coeffs.flux * r.v;
                            for (const auto& c : act) s.A(r.idx, c.idx) += wq * f.coeffs.sigma * r.v * c.v;
                        }
                    }
                }
            }
    return s;
}

}  // namespace oracle
