#include "tbs/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace tbs {

QuadratureRule gauss_rule(int count) {
    if (count < 1 || count > 16) {
        throw Error(ErrorKind::QuadratureRange, "Gauss rule size " + std::to_string(count) + " outside 1..16");
    }
    QuadratureRule rule;
    rule.nodes.resize(count);
    rule.weights.resize(count);
    const int n = count;
    for (int i = 0; i < (n + 1) / 2; ++i) {
        // Newton iteration on P_n from the Chebyshev-like initial guess.
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0;
            double p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            const double pn = (n == 1) ? x : p1;
            const double pnm1 = (n == 1) ? 1.0 : p0;
            dp = n * (x * pn - pnm1) / (x * x - 1.0);
            const double dx = pn / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        if (n == 1) {
            x = 0.0;
            dp = 1.0;
        }
        const double wt = 2.0 / ((1.0 - x * x) * dp * dp);
        // Map [-1, 1] -> (0, 1); x > 0 for i in the first half.
        rule.nodes[i] = 0.5 * (1.0 - x);
        rule.nodes[n - 1 - i] = 0.5 * (1.0 + x);
        rule.weights[i] = 0.5 * wt;
        rule.weights[n - 1 - i] = 0.5 * wt;
    }
    return rule;
}

namespace {

// Both halves of the unit cell: knots of even-degree splines sit at half-integers.
template <typename F>
void for_each_cell_point(int count, F&& fn) {
    const QuadratureRule rule = gauss_rule(count);
    for (int half = 0; half < 2; ++half) {
        for (int q = 0; q < rule.size(); ++q) fn(0.5 * (half + rule.nodes[q]), 0.5 * rule.weights[q]);
    }
}

void check_flags(int n, int flag) {
    if (flag < 0 || flag > 1) throw Error(ErrorKind::Misuse, "derivative flag must be 0 or 1");
    if (flag > n) throw Error(ErrorKind::Smoothness, "cannot differentiate a degree-0 B-spline");
}

}  // namespace

CellTrilinearTable cell_trilinear(int nb, int np, int da, int db) {
    check_degree(nb);
    check_degree(np);
    check_flags(nb, da);
    check_flags(nb, db);
    CellTrilinearTable t;
    t.nb = nb;
    t.np = np;
    t.da = da;
    t.db = db;
    t.lo_b = cell_offset_lo(nb);
    t.wb = cell_offset_width(nb);
    t.lo_p = cell_offset_lo(np);
    t.wp = cell_offset_width(np);
    t.values.assign(static_cast<std::size_t>(t.wb) * t.wb * t.wp, 0.0);

    std::vector<double> va(t.wb), vb(t.wb), vc(t.wp);
    for_each_cell_point((3 * nb + np + 2) / 2, [&](double x, double wt) {
        for (int i = 0; i < t.wb; ++i) {
            va[i] = eval_bspline_derivative(nb, x - (t.lo_b + i), da);
            vb[i] = eval_bspline_derivative(nb, x - (t.lo_b + i), db);
        }
        for (int i = 0; i < t.wp; ++i) vc[i] = eval_bspline(np, x - (t.lo_p + i));
        for (int a = 0; a < t.wb; ++a) {
            for (int b = 0; b < t.wb; ++b) {
                const double ab = wt * va[a] * vb[b];
                double* row = &t.values[(static_cast<std::size_t>(a) * t.wb + b) * t.wp];
                for (int c = 0; c < t.wp; ++c) row[c] += ab * vc[c];
            }
        }
    });
    return t;
}

CellBilinearTable cell_bilinear(int n1, int n2, int da, int db) {
    check_degree(n1);
    check_degree(n2);
    check_flags(n1, da);
    check_flags(n2, db);
    CellBilinearTable t;
    t.n1 = n1;
    t.n2 = n2;
    t.da = da;
    t.db = db;
    t.lo1 = cell_offset_lo(n1);
    t.w1 = cell_offset_width(n1);
    t.lo2 = cell_offset_lo(n2);
    t.w2 = cell_offset_width(n2);
    t.values.assign(static_cast<std::size_t>(t.w1) * t.w2, 0.0);
    std::vector<double> v1(t.w1), v2(t.w2);
    for_each_cell_point((n1 + n2 + 2) / 2 + 1, [&](double x, double wt) {
        for (int i = 0; i < t.w1; ++i) v1[i] = eval_bspline_derivative(n1, x - (t.lo1 + i), da);
        for (int i = 0; i < t.w2; ++i) v2[i] = eval_bspline_derivative(n2, x - (t.lo2 + i), db);
        for (int a = 0; a < t.w1; ++a) {
            for (int b = 0; b < t.w2; ++b) t.values[static_cast<std::size_t>(a) * t.w2 + b] += wt * v1[a] * v2[b];
        }
    });
    return t;
}

UnivariateTrilinearKernel trilinear_kernel_truncated(const CellTrilinearTable& cell, long l, CellRange range) {
    UnivariateTrilinearKernel k;
    k.nb = cell.nb;
    k.np = cell.np;
    k.da = cell.da;
    k.db = cell.db;
    k.k_radius = cell.nb;
    k.m_radius = overlap_radius(cell.nb, cell.np);
    k.table.assign(static_cast<std::size_t>(k.k_width()) * k.m_width(), 0.0);
    const int hi_b = cell.lo_b + cell.wb - 1;
    const int hi_p = cell.lo_p + cell.wp - 1;
    // Cells j carrying part of beta_l's support: l - j in [lo_b, hi_b].
    for (long j = l - hi_b; j <= l - cell.lo_b; ++j) {
        if (!range.contains(j)) continue;
        const int b = static_cast<int>(l - j);
        for (int dk = -k.k_radius; dk <= k.k_radius; ++dk) {
            const int a = b + dk;
            if (a < cell.lo_b || a > hi_b) continue;
            for (int dm = -k.m_radius; dm <= k.m_radius; ++dm) {
                const int c = b + dm;
                if (c < cell.lo_p || c > hi_p) continue;
                k.table[static_cast<std::size_t>(dk + k.k_radius) * k.m_width() + (dm + k.m_radius)] +=
                    cell(a, b, c);
            }
        }
    }
    return k;
}

UnivariateTrilinearKernel trilinear_kernel_truncated(int nb, int np, int da, int db, long l, CellRange range) {
    return trilinear_kernel_truncated(cell_trilinear(nb, np, da, db), l, range);
}

UnivariateTrilinearKernel trilinear_kernel(int nb, int np, int da, int db) {
    return trilinear_kernel_truncated(nb, np, da, db, 0, CellRange{});
}

UnivariateBilinearKernel bilinear_kernel_truncated(const CellBilinearTable& cell, long l, CellRange range) {
    UnivariateBilinearKernel k;
    k.n1 = cell.n1;
    k.n2 = cell.n2;
    k.da = cell.da;
    k.db = cell.db;
    k.radius = overlap_radius(cell.n1, cell.n2);
    k.table.assign(k.width(), 0.0);
    const int hi1 = cell.lo1 + cell.w1 - 1;
    const int hi2 = cell.lo2 + cell.w2 - 1;
    for (long jc = l - hi2; jc <= l - cell.lo2; ++jc) {
        if (!range.contains(jc)) continue;
        const int b = static_cast<int>(l - jc);
        for (int j = -k.radius; j <= k.radius; ++j) {
            const int a = b + j;
            if (a < cell.lo1 || a > hi1) continue;
            k.table[j + k.radius] += cell(a, b);
        }
    }
    return k;
}

UnivariateBilinearKernel bilinear_kernel(int n1, int n2, int da, int db) {
    return bilinear_kernel_truncated(cell_bilinear(n1, n2, da, db), 0, CellRange{});
}

std::vector<SeparableKernelSet::Term> SeparableKernelSet::stiffness_terms() const {
    std::vector<Term> terms;
    for (int a = 0; a < dim; ++a) terms.push_back({a, stiffness_scale[a]});
    return terms;
}

SeparableKernelSet compose_separable(const UnivariateTrilinearKernel& f, const UnivariateTrilinearKernel& w,
                                     std::array<double, kMaxDim> step, int dim) {
    if (dim < 1 || dim > kMaxDim) throw Error(ErrorKind::InputValidation, "dimension must be 1, 2 or 3");
    if (f.da != 0 || f.db != 0 || w.da != 1 || w.db != 1 || f.nb != w.nb || f.np != w.np) {
        throw Error(ErrorKind::Misuse, "compose_separable expects matching f (0,0) and w (1,1) kernels");
    }
    SeparableKernelSet s;
    s.dim = dim;
    s.nb = f.nb;
    s.np = f.np;
    s.f = f;
    s.w = w;
    double volume = 1.0;
    for (int a = 0; a < dim; ++a) {
        if (!(step[a] > 0.0)) throw Error(ErrorKind::InputValidation, "grid step must be positive");
        s.step[a] = step[a];
        volume *= step[a];
    }
    for (int a = 0; a < dim; ++a) s.stiffness_scale[a] = volume / (step[a] * step[a]);
    s.mass_scale = volume;
    return s;
}

Tensor<double> materialize_stencil(const SeparableKernelSet& set, double d_value, double m_value) {
    const int r = set.f.k_radius;
    std::array<int, kMaxDim> sizes{1, 1, 1};
    for (int a = 0; a < set.dim; ++a) sizes[a] = 2 * r + 1;
    Tensor<double> out(Extents(set.dim, sizes));
    // With constant fields the m-sum factorizes per axis into row sums.
    std::vector<double> fsum(2 * r + 1, 0.0), wsum(2 * r + 1, 0.0);
    for (int dk = -r; dk <= r; ++dk) {
        for (int dm = -set.f.m_radius; dm <= set.f.m_radius; ++dm) {
            fsum[dk + r] += set.f(dk, dm);
            wsum[dk + r] += set.w(dk, dm);
        }
    }
    for (int i = 0; i < sizes[0]; ++i) {
        for (int j = 0; j < sizes[1]; ++j) {
            for (int k = 0; k < sizes[2]; ++k) {
                const std::array<int, kMaxDim> idx{i, j, k};
                double stiff = 0.0;
                for (int a = 0; a < set.dim; ++a) {
                    double prod = set.stiffness_scale[a];
                    for (int b = 0; b < set.dim; ++b) prod *= (a == b ? wsum[idx[b]] : fsum[idx[b]]);
                    stiff += prod;
                }
                double mass = set.mass_scale;
                for (int b = 0; b < set.dim; ++b) mass *= fsum[idx[b]];
                out(i, j, k) = d_value * stiff + m_value * mass;
            }
        }
    }
    return out;
}

double FaceKernel::normal(int k, int l) const {
    const int ik = k - first;
    const int il = l - first;
    const int n = static_cast<int>(normal_values.size());
    if (ik < 0 || il < 0 || ik >= n || il >= n) return 0.0;
    return normal_values[ik] * normal_values[il];
}

FaceKernel boundary_face_kernel(const BSplineBasis& basis, const Face& face) {
    basis.validate();
    int axis = -1;
    for (int a = 0; a < kMaxDim; ++a) {
        const double c = face.normal[a];
        if (c == 0.0) continue;
        if (std::abs(c) != 1.0 || axis >= 0) {
            throw Error(ErrorKind::UnsupportedGeometry, "only axis-aligned faces are supported");
        }
        axis = a;
    }
    if (axis < 0 || axis >= basis.dim) {
        throw Error(ErrorKind::UnsupportedGeometry, "face normal must be a coordinate axis of the basis");
    }
    FaceKernel fk;
    fk.axis = axis;
    std::array<double, kMaxDegree + 1> w{};
    const int first = bspline_weights(basis.degree, face.offset, w);
    int lo = 0;
    int hi = basis.degree;
    while (lo <= hi && w[lo] == 0.0) ++lo;
    while (hi >= lo && w[hi] == 0.0) --hi;
    fk.first = first + lo;
    fk.normal_values.assign(w.begin() + lo, w.begin() + hi + 1);
    fk.tangential = bilinear_kernel(basis.degree, basis.degree, 0, 0);
    return fk;
}

AxisKernels build_axis_kernels(int nodes, bool used, double h, int nb, int np, int ns) {
    check_degree(nb);
    check_degree(np);
    check_degree(ns);
    AxisKernels ax;
    ax.used = used;
    ax.nb = nb;
    ax.np = np;
    ax.ns = ns;
    if (!used) {
        ax.nodes = 1;
        ax.positions = 1;
        ax.f = {1.0};
        ax.w = {0.0};
        ax.mass = {1.0};
        ax.source = {1.0};
        ax.integral = {1.0};
        ax.face_lo = {0.0};
        ax.face_hi = {0.0};
        ax.full = {1};
        return ax;
    }
    if (nodes < 2) throw Error(ErrorKind::InputValidation, "a grid axis needs at least 2 nodes");
    ax.nodes = nodes;
    ax.h = h;
    ax.pad = nb / 2;
    ax.pad_p = np / 2;
    ax.pad_s = ns / 2;
    ax.positions = nodes + 2 * ax.pad;
    ax.k_radius = nb;
    ax.m_radius = overlap_radius(nb, np);
    ax.s_radius = overlap_radius(ns, nb);

    const CellRange cells{0, nodes - 2};
    const CellTrilinearTable cf = cell_trilinear(nb, np, 0, 0);
    const CellTrilinearTable cw = nb > 0 ? cell_trilinear(nb, np, 1, 1) : cf;
    const CellBilinearTable cm = cell_bilinear(nb, nb, 0, 0);
    const CellBilinearTable cs = cell_bilinear(ns, nb, 0, 0);
    const int lo_b = cell_offset_lo(nb);
    const int hi_b = lo_b + cell_offset_width(nb) - 1;
    const QuadratureRule rule = gauss_rule(nb / 2 + 2);

    for (int p = 0; p < ax.positions; ++p) {
        const long l = p - ax.pad;
        const auto tf = trilinear_kernel_truncated(cf, l, cells);
        ax.f.insert(ax.f.end(), tf.table.begin(), tf.table.end());
        if (nb > 0) {
            const auto tw = trilinear_kernel_truncated(cw, l, cells);
            ax.w.insert(ax.w.end(), tw.table.begin(), tw.table.end());
        } else {
            ax.w.insert(ax.w.end(), tf.table.size(), 0.0);
        }
        const auto tm = bilinear_kernel_truncated(cm, l, cells);
        ax.mass.insert(ax.mass.end(), tm.table.begin(), tm.table.end());
        const auto ts = bilinear_kernel_truncated(cs, l, cells);
        ax.source.insert(ax.source.end(), ts.table.begin(), ts.table.end());

        double integral = 0.0;
        for (long j = std::max<long>(0, l - hi_b); j <= std::min<long>(nodes - 2, l - lo_b); ++j) {
            for (int half = 0; half < 2; ++half) {
                for (int q = 0; q < rule.size(); ++q) {
                    const double x = j + 0.5 * (half + rule.nodes[q]);
                    integral += 0.5 * rule.weights[q] * eval_bspline(nb, x - l);
                }
            }
        }
        ax.integral.push_back(integral);

        const double bl_lo = eval_bspline(nb, 0.0 - l);
        const double bl_hi = eval_bspline(nb, (nodes - 1.0) - l);
        for (int dk = -nb; dk <= nb; ++dk) {
            ax.face_lo.push_back(bl_lo * eval_bspline(nb, 0.0 - (l + dk)));
            ax.face_hi.push_back(bl_hi * eval_bspline(nb, (nodes - 1.0) - (l + dk)));
        }
        ax.full.push_back(static_cast<char>(l - hi_b >= 0 && l - lo_b <= nodes - 2));
    }
    return ax;
}

}  // namespace tbs
