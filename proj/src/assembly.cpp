#include "tbs/assembly.hpp"

namespace tbs {

namespace {

AxisCellTables unused_axis() {
    AxisCellTables t;
    t.f = {1.0};
    t.w = {0.0};
    t.mass = {1.0};
    t.source = {1.0};
    t.integral = {1.0};
    t.face = {std::vector<double>{0.0}, std::vector<double>{0.0}};
    return t;
}

AxisCellTables used_axis(int nb, int np, int ns) {
    AxisCellTables t;
    t.lo_b = cell_offset_lo(nb);
    t.lo_p = cell_offset_lo(np);
    t.lo_s = cell_offset_lo(ns);
    t.wb = cell_offset_width(nb);
    t.wp = cell_offset_width(np);
    t.ws = cell_offset_width(ns);
    const CellTrilinearTable cf = cell_trilinear(nb, np, 0, 0);
    t.f.resize(static_cast<std::size_t>(t.wb) * t.wb * t.wp);
    t.w.assign(t.f.size(), 0.0);
    for (int k = 0; k < t.wb; ++k)
        for (int l = 0; l < t.wb; ++l)
            for (int m = 0; m < t.wp; ++m) t.f[(k * t.wb + l) * t.wp + m] = cf(k + t.lo_b, l + t.lo_b, m + t.lo_p);
    if (nb > 0) {
        const CellTrilinearTable cw = cell_trilinear(nb, np, 1, 1);
        for (int k = 0; k < t.wb; ++k)
            for (int l = 0; l < t.wb; ++l)
                for (int m = 0; m < t.wp; ++m) t.w[(k * t.wb + l) * t.wp + m] = cw(k + t.lo_b, l + t.lo_b, m + t.lo_p);
    }
    const CellBilinearTable cm = cell_bilinear(nb, nb, 0, 0);
    const CellBilinearTable cs = cell_bilinear(ns, nb, 0, 0);
    t.mass.resize(static_cast<std::size_t>(t.wb) * t.wb);
    for (int k = 0; k < t.wb; ++k)
        for (int l = 0; l < t.wb; ++l) t.mass[k * t.wb + l] = cm(k + t.lo_b, l + t.lo_b);
    t.source.resize(static_cast<std::size_t>(t.ws) * t.wb);
    for (int j = 0; j < t.ws; ++j)
        for (int l = 0; l < t.wb; ++l) t.source[j * t.wb + l] = cs(j + t.lo_s, l + t.lo_b);

    const QuadratureRule rule = gauss_rule(nb / 2 + 2);
    t.integral.assign(t.wb, 0.0);
    for (int l = 0; l < t.wb; ++l) {
        for (int half = 0; half < 2; ++half)
            for (int q = 0; q < rule.size(); ++q)
                t.integral[l] += 0.5 * rule.weights[q] * eval_bspline(nb, 0.5 * (half + rule.nodes[q]) - (l + t.lo_b));
    }
    for (int side = 0; side < 2; ++side) {
        t.face[side].resize(t.wb);
        for (int l = 0; l < t.wb; ++l) t.face[side][l] = eval_bspline(nb, side - (l + t.lo_b));
    }
    return t;
}

}  // namespace

std::array<int, kMaxDim> ElementContext::local_offsets(int local) const {
    std::array<int, kMaxDim> o{};
    for (int a = kMaxDim - 1; a >= 0; --a) {
        o[a] = local % axes[a].wb + axes[a].lo_b;
        local /= axes[a].wb;
    }
    return o;
}

ElementContext make_element_context(const Grid& grid, int nb, int np, int ns) {
    check_degree(nb);
    check_degree(np);
    check_degree(ns);
    grid.validate();
    ElementContext ctx;
    ctx.dim = grid.dim;
    ctx.nb = nb;
    ctx.np = np;
    ctx.ns = ns;
    ctx.step = grid.step;
    ctx.volume = 1.0;
    for (int a = 0; a < grid.dim; ++a) ctx.volume *= grid.step[a];
    for (int a = 0; a < kMaxDim; ++a) {
        if (a < grid.dim) {
            ctx.axes[a] = used_axis(nb, np, ns);
            ctx.stiffness_scale[a] = ctx.volume / (grid.step[a] * grid.step[a]);
        } else {
            ctx.axes[a] = unused_axis();
            ctx.stiffness_scale[a] = 0.0;
        }
    }
    return ctx;
}

void element_matrix(const ElementContext& ctx, const SplineField& d, const SplineField& mu,
                    const std::array<int, kMaxDim>& cell, Eigen::MatrixXd& out) {
    const AxisCellTables& A0 = ctx.axes[0];
    const AxisCellTables& A1 = ctx.axes[1];
    const AxisCellTables& A2 = ctx.axes[2];
    const int p0 = A0.wp, p1 = A1.wp, p2 = A2.wp;
    const int b0 = A0.wb, b1 = A1.wb, b2 = A2.wb;

    // Parameter coefficients over the cell window.
    thread_local std::vector<double> D, M;
    D.resize(static_cast<std::size_t>(p0) * p1 * p2);
    M.resize(D.size());
    for (int c0 = 0; c0 < p0; ++c0)
        for (int c1 = 0; c1 < p1; ++c1)
            for (int c2 = 0; c2 < p2; ++c2) {
                const long m0 = cell[0] + A0.lo_p + c0, m1 = cell[1] + A1.lo_p + c1, m2 = cell[2] + A2.lo_p + c2;
                D[(c0 * p1 + c1) * p2 + c2] = d.at(m0, m1, m2);
                M[(c0 * p1 + c1) * p2 + c2] = mu.at(m0, m1, m2);
            }

    // Contract axis 2: X*[c0][c1][k2][l2].
    const int n2 = b2 * b2;
    thread_local std::vector<double> XfD, XwD, XfM;
    XfD.assign(static_cast<std::size_t>(p0) * p1 * n2, 0.0);
    XwD.assign(XfD.size(), 0.0);
    XfM.assign(XfD.size(), 0.0);
    for (int c01 = 0; c01 < p0 * p1; ++c01)
        for (int kl = 0; kl < n2; ++kl) {
            double sf = 0.0, sw = 0.0, sm = 0.0;
            for (int c2 = 0; c2 < p2; ++c2) {
                const double dv = D[c01 * p2 + c2];
                sf += dv * A2.f[kl * p2 + c2];
                sw += dv * A2.w[kl * p2 + c2];
                sm += M[c01 * p2 + c2] * A2.f[kl * p2 + c2];
            }
            XfD[c01 * n2 + kl] = sf;
            XwD[c01 * n2 + kl] = sw;
            XfM[c01 * n2 + kl] = sm;
        }

    // Contract axis 1: Yc[c0][k1 l1][k2 l2] carries every term whose axis-0 factor is f,
    // Yd carries the axis-0 stiffness term.
    const int n1 = b1 * b1;
    const double s0 = ctx.stiffness_scale[0], s1 = ctx.stiffness_scale[1], s2 = ctx.stiffness_scale[2];
    thread_local std::vector<double> Yc, Yd;
    Yc.assign(static_cast<std::size_t>(p0) * n1 * n2, 0.0);
    Yd.assign(Yc.size(), 0.0);
    for (int c0 = 0; c0 < p0; ++c0)
        for (int kl1 = 0; kl1 < n1; ++kl1)
            for (int kl2 = 0; kl2 < n2; ++kl2) {
                double sc = 0.0, sd = 0.0;
                for (int c1 = 0; c1 < p1; ++c1) {
                    const std::size_t x = (static_cast<std::size_t>(c0) * p1 + c1) * n2 + kl2;
                    const double f1 = A1.f[kl1 * p1 + c1];
                    const double w1 = A1.w[kl1 * p1 + c1];
                    sc += s1 * XfD[x] * w1 + s2 * XwD[x] * f1 + ctx.volume * XfM[x] * f1;
                    sd += XfD[x] * f1;
                }
                Yc[(static_cast<std::size_t>(c0) * n1 + kl1) * n2 + kl2] = sc;
                Yd[(static_cast<std::size_t>(c0) * n1 + kl1) * n2 + kl2] = sd;
            }

    // Contract axis 0 and scatter into (k, l) local order.
    const int L = b0 * b1 * b2;
    out.setZero(L, L);
    for (int k0 = 0; k0 < b0; ++k0)
        for (int l0 = 0; l0 < b0; ++l0)
            for (int k1 = 0; k1 < b1; ++k1)
                for (int l1 = 0; l1 < b1; ++l1)
                    for (int k2 = 0; k2 < b2; ++k2)
                        for (int l2 = 0; l2 < b2; ++l2) {
                            const int kl0 = k0 * b0 + l0, kl1 = k1 * b1 + l1, kl2 = k2 * b2 + l2;
                            double s = 0.0;
                            for (int c0 = 0; c0 < p0; ++c0) {
                                const std::size_t y = (static_cast<std::size_t>(c0) * n1 + kl1) * n2 + kl2;
                                s += Yc[y] * A0.f[kl0 * p0 + c0] + s0 * Yd[y] * A0.w[kl0 * p0 + c0];
                            }
                            out((k0 * b1 + k1) * b2 + k2, (l0 * b1 + l1) * b2 + l2) = s;
                        }
}

void element_vector(const ElementContext& ctx, const SplineField& q, const std::array<int, kMaxDim>& cell,
                    Eigen::VectorXd& out) {
    const AxisCellTables& A0 = ctx.axes[0];
    const AxisCellTables& A1 = ctx.axes[1];
    const AxisCellTables& A2 = ctx.axes[2];
    const int b0 = A0.wb, b1 = A1.wb, b2 = A2.wb;
    out.setZero(b0 * b1 * b2);
    for (int j0 = 0; j0 < A0.ws; ++j0)
        for (int j1 = 0; j1 < A1.ws; ++j1)
            for (int j2 = 0; j2 < A2.ws; ++j2) {
                const double qv = q.at(cell[0] + A0.lo_s + j0, cell[1] + A1.lo_s + j1, cell[2] + A2.lo_s + j2);
                if (qv == 0.0) continue;
                for (int l0 = 0; l0 < b0; ++l0) {
                    const double v0 = qv * A0.source[j0 * b0 + l0];
                    for (int l1 = 0; l1 < b1; ++l1) {
                        const double v1 = v0 * A1.source[j1 * b1 + l1];
                        for (int l2 = 0; l2 < b2; ++l2) out[(l0 * b1 + l1) * b2 + l2] += v1 * A2.source[j2 * b2 + l2];
                    }
                }
            }
    out *= ctx.volume;
}

void add_face_matrix(const ElementContext& ctx, int axis, int side, double sigma, Eigen::MatrixXd& out) {
    if (sigma == 0.0) return;
    double scale = sigma;
    for (int b = 0; b < ctx.dim; ++b)
        if (b != axis) scale *= ctx.step[b];
    const int L = ctx.local_count();
    for (int k = 0; k < L; ++k) {
        int rk = k;
        std::array<int, kMaxDim> ki{};
        for (int a = kMaxDim - 1; a >= 0; --a) {
            ki[a] = rk % ctx.axes[a].wb;
            rk /= ctx.axes[a].wb;
        }
        const double fk = ctx.axes[axis].face[side][ki[axis]];
        if (fk == 0.0) continue;
        for (int l = 0; l < L; ++l) {
            int rl = l;
            std::array<int, kMaxDim> li{};
            for (int a = kMaxDim - 1; a >= 0; --a) {
                li[a] = rl % ctx.axes[a].wb;
                rl /= ctx.axes[a].wb;
            }
            double v = scale * fk * ctx.axes[axis].face[side][li[axis]];
            for (int b = 0; b < kMaxDim; ++b)
                if (b != axis) v *= ctx.axes[b].mass[ki[b] * ctx.axes[b].wb + li[b]];
            out(k, l) += v;
        }
    }
}

void add_face_vector(const ElementContext& ctx, int axis, int side, double flux, Eigen::VectorXd& out) {
    if (flux == 0.0) return;
    double scale = flux;
    for (int b = 0; b < ctx.dim; ++b)
        if (b != axis) scale *= ctx.step[b];
    const int L = ctx.local_count();
    for (int l = 0; l < L; ++l) {
        int rl = l;
        std::array<int, kMaxDim> li{};
        for (int a = kMaxDim - 1; a >= 0; --a) {
            li[a] = rl % ctx.axes[a].wb;
            rl /= ctx.axes[a].wb;
        }
        double v = scale * ctx.axes[axis].face[side][li[axis]];
        for (int b = 0; b < kMaxDim; ++b)
            if (b != axis) v *= ctx.axes[b].integral[li[b]];
        out[l] += v;
    }
}

std::vector<BoundaryFace> boundary_faces(const Domain& domain, const SurfaceModel& surface,
                                         const std::array<int, kMaxDim>& cell) {
    std::vector<BoundaryFace> faces;
    const Extents& e = domain.cells();
    for (int a = 0; a < domain.grid().dim; ++a) {
        for (int side = 0; side < 2; ++side) {
            std::array<long, kMaxDim> nb{cell[0], cell[1], cell[2]};
            nb[a] += side ? 1 : -1;
            if (domain.occupied(nb[0], nb[1], nb[2])) continue;
            const bool on_edge = nb[a] < 0 || nb[a] >= e.n[a];
            faces.push_back({a, side, on_edge ? surface.edge[a][side] : surface.interior});
        }
    }
    return faces;
}

Eigen::MatrixXd boundary_cell_quadrature(const Domain& domain, const std::vector<CellClass>& classes,
                                         const ElementContext& ctx, const SurfaceModel& surface,
                                         const SplineField& d, const SplineField& mu,
                                         const std::array<int, kMaxDim>& cell) {
    const Index idx = domain.cells().index(cell[0], cell[1], cell[2]);
    if (classes.at(idx) != CellClass::Boundary) {
        throw Error(ErrorKind::Misuse, "boundary quadrature requested for a non-boundary cell");
    }
    Eigen::MatrixXd e;
    element_matrix(ctx, d, mu, cell, e);
    for (const BoundaryFace& f : boundary_faces(domain, surface, cell)) add_face_matrix(ctx, f.axis, f.side, f.coeffs.sigma, e);
    return e;
}

}  // namespace tbs
