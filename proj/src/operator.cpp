#include "tbs/operator.hpp"

#include <algorithm>

#include "tbs/parallel.hpp"

namespace tbs {

Strategy parse_strategy(const std::string& name) {
    if (name == "onthefly" || name == "on-the-fly") return Strategy::OnTheFly;
    if (name == "block" || name == "block-tensor") return Strategy::BlockTensor;
    if (name == "sparse") return Strategy::Sparse;
    throw Error(ErrorKind::Configuration, "unknown operator strategy '" + name + "'");
}

const char* to_string(Strategy s) {
    switch (s) {
        case Strategy::OnTheFly: return "onthefly";
        case Strategy::BlockTensor: return "block";
        case Strategy::Sparse: return "sparse";
    }
    return "?";
}

namespace {

void check_form(const FormData& form) {
    const Grid& g = form.domain.grid();
    check_degree(form.nb);
    check_degree(form.np);
    for (const SplineField* f : {&form.d, &form.mu}) {
        if (f->degree != form.np) {
            throw Error(ErrorKind::ExtentMismatch, "parameter field degree " + std::to_string(f->degree) +
                                                       " differs from n_p = " + std::to_string(form.np));
        }
        if (!(f->coeffs.extents == coefficient_extents(g, form.np))) {
            throw Error(ErrorKind::ExtentMismatch, "parameter field extents " + to_string(f->coeffs.extents) +
                                                       " do not match grid " + to_string(coefficient_extents(g, form.np)));
        }
        require_finite(f->coeffs, "parameter field");
    }
}

std::array<int, kMaxDim> stencil_widths(const FormData& form) {
    std::array<int, kMaxDim> kw{1, 1, 1};
    for (int a = 0; a < form.domain.grid().dim; ++a) kw[a] = 2 * form.nb + 1;
    return kw;
}

void check_budget(double bytes, double budget, const char* what) {
    if (bytes > budget) {
        throw Error(ErrorKind::Resource, std::string(what) + " needs " + std::to_string(bytes / (1 << 30)) +
                                             " GiB, budget is " + std::to_string(budget / (1 << 30)) +
                                             " GiB; use the on-the-fly strategy");
    }
}

/// Per-row stencil accumulation of element matrices (row l, offset k - l) in double.
std::vector<double> gather_element_stencils(const FormData& form, const NodeClassification& nodes,
                                            const std::vector<Index>* only_rows) {
    const Grid& g = form.domain.grid();
    const ElementContext ctx = make_element_context(g, form.nb, form.np, form.nb);
    const std::array<int, kMaxDim> kw = stencil_widths(form);
    const int ks = kw[0] * kw[1] * kw[2];
    std::array<int, kMaxDim> pad{0, 0, 0}, kr{0, 0, 0};
    for (int a = 0; a < g.dim; ++a) {
        pad[a] = nodes.pad;
        kr[a] = form.nb;
    }
    const Index rows = only_rows ? static_cast<Index>(only_rows->size()) : nodes.extents.size();
    std::vector<double> st(static_cast<std::size_t>(rows) * ks, 0.0);
    auto slot_of = [&](Index node) -> Index {
        if (!only_rows) return node;
        auto it = std::lower_bound(only_rows->begin(), only_rows->end(), node);
        return (it != only_rows->end() && *it == node) ? it - only_rows->begin() : -1;
    };

    const int L = ctx.local_count();
    std::vector<std::array<int, kMaxDim>> offs(L);
    for (int i = 0; i < L; ++i) offs[i] = ctx.local_offsets(i);
    std::vector<Index> node(L), slot(L);
    Eigen::MatrixXd E;
    const Extents& ce = form.domain.cells();
    for (int i = 0; i < ce.n[0]; ++i)
        for (int j = 0; j < ce.n[1]; ++j)
            for (int k = 0; k < ce.n[2]; ++k) {
                if (!form.domain.occupied(i, j, k)) continue;
                const std::array<int, kMaxDim> cell{i, j, k};
                bool any = false;
                for (int r = 0; r < L; ++r) {
                    node[r] = nodes.extents.index(cell[0] + offs[r][0] + pad[0], cell[1] + offs[r][1] + pad[1],
                                                  cell[2] + offs[r][2] + pad[2]);
                    slot[r] = nodes.is_active(node[r]) ? slot_of(node[r]) : -1;
                    any = any || slot[r] >= 0;
                }
                if (!any) continue;
                element_matrix(ctx, form.d, form.mu, cell, E);
                for (const BoundaryFace& f : boundary_faces(form.domain, form.surface, cell))
                    add_face_matrix(ctx, f.axis, f.side, f.coeffs.sigma, E);
                for (int l = 0; l < L; ++l) {
                    if (slot[l] < 0) continue;
                    double* row = st.data() + static_cast<std::size_t>(slot[l]) * ks;
                    for (int kk = 0; kk < L; ++kk) {
                        if (!nodes.is_active(node[kk])) continue;
                        std::array<int, kMaxDim> dk{};
                        bool inside = true;
                        for (int a = 0; a < kMaxDim; ++a) {
                            dk[a] = offs[kk][a] - offs[l][a] + kr[a];
                            inside = inside && dk[a] >= 0 && dk[a] < kw[a];
                        }
                        if (!inside) continue;  // supports meet in a single point
                        row[(dk[0] * kw[1] + dk[1]) * kw[2] + dk[2]] += E(kk, l);
                    }
                }
            }
    return st;
}

}  // namespace

// ---------------------------------------------------------------------------------------------
// SystemOperator

template <typename Scalar>
SystemOperator<Scalar>::SystemOperator(NodeClassification nodes) : nodes_(std::move(nodes)) {
    for (Index i = 0; i < nodes_.extents.size(); ++i)
        if (!nodes_.is_active(i)) inactive_.push_back(i);
}

template <typename Scalar>
void SystemOperator<Scalar>::apply(const Vector& c, Vector& t) const {
    if (c.size() != size()) {
        throw Error(ErrorKind::ExtentMismatch, "coefficient vector has " + std::to_string(c.size()) +
                                                   " entries, operator has " + std::to_string(size()));
    }
    t.resize(size());
    bool dirty = false;
    for (Index i : inactive_) dirty = dirty || c[i] != Scalar(0);
    if (!dirty) {
        apply_active(c, t);
        return;
    }
    Vector masked = c;
    for (Index i : inactive_) masked[i] = Scalar(0);
    apply_active(masked, t);
}

template <typename Scalar>
Tensor<Scalar> SystemOperator<Scalar>::apply(const Tensor<Scalar>& c) const {
    if (!(c.extents == extents())) {
        throw Error(ErrorKind::ExtentMismatch,
                    "coefficients " + to_string(c.extents) + " do not match operator " + to_string(extents()));
    }
    if (!c.all_finite()) throw Error(ErrorKind::InputValidation, "coefficients contain non-finite values");
    Tensor<Scalar> t(extents());
    apply(c.data, t.data);
    return t;
}

// ---------------------------------------------------------------------------------------------
// OnTheFlyOperator

template <typename Scalar>
OnTheFlyOperator<Scalar>::OnTheFlyOperator(const FormData& form, BlockShape blocks)
    : SystemOperator<Scalar>(classify_nodes(form.domain, form.nb)), blocks_(blocks) {
    check_form(form);
    const Grid& g = form.domain.grid();
    dim_ = g.dim;
    first_axis_ = kMaxDim - g.dim;
    nb_ = form.nb;
    auto right_aligned = [&](const Extents& x) {
        Extents r(kMaxDim, {1, 1, 1});
        for (int a = 0; a < g.dim; ++a) r.n[a + first_axis_] = x.n[a];
        return r;
    };
    ext_ = right_aligned(this->nodes_.extents);
    for (int a = 0; a < kMaxDim; ++a) {
        const int pa = a - first_axis_;
        const bool used = pa >= 0;
        axes_[a] = build_axis_kernels(used ? g.nodes[pa] : 1, used, used ? g.step[pa] : 1.0, form.nb, form.np,
                                      form.nb);
        kw_[a] = axes_[a].k_width();
        mw_[a] = axes_[a].m_width();
        if (blocks_.extent[a] < 1) throw Error(ErrorKind::Configuration, "block extent must be positive");
        auto cast = [](const std::vector<double>& v) { return std::vector<Scalar>(v.begin(), v.end()); };
        f_[a] = cast(axes_[a].f);
        w_[a] = cast(axes_[a].w);
        mass_[a] = cast(axes_[a].mass);
        face_lo_[a] = cast(axes_[a].face_lo);
        face_hi_[a] = cast(axes_[a].face_hi);
    }
    volume_ = 1.0;
    for (int a = 0; a < g.dim; ++a) volume_ *= g.step[a];
    for (int pa = 0; pa < g.dim; ++pa) {
        const int a = pa + first_axis_;
        stiffness_scale_[a] = volume_ / (g.step[pa] * g.step[pa]);
        face_scale_[a] = volume_ / g.step[pa];
        edge_sigma_[a] = {form.surface.edge[pa][0].sigma, form.surface.edge[pa][1].sigma};
    }
    {
        const AxisKernels& a2 = axes_[2];
        const int kw = a2.k_width(), mw = a2.m_width();
        ft2_.assign(a2.f.size(), Scalar(0));
        wt2_.assign(a2.w.size(), Scalar(0));
        for (int p = 0; p < a2.positions; ++p)
            for (int dk = 0; dk < kw; ++dk)
                for (int dm = 0; dm < mw; ++dm) {
                    const std::size_t src = (static_cast<std::size_t>(p) * kw + dk) * mw + dm;
                    const std::size_t dst = (static_cast<std::size_t>(p) * mw + dm) * kw + dk;
                    ft2_[dst] = Scalar(a2.f[src]);
                    wt2_[dst] = Scalar(stiffness_scale_[2] * a2.w[src]);
                }
    }
    field_extents_ = right_aligned(coefficient_extents(g, form.np));
    d_ = form.d.coeffs.data.template cast<Scalar>();
    mu_ = form.mu.coeffs.data.template cast<Scalar>();
    build_boundary_stencils(form);
}

template <typename Scalar>
void OnTheFlyOperator<Scalar>::build_boundary_stencils(const FormData& form) {
    const NodeClassification& nc = this->nodes_;
    boundary_index_.clear();
    for (Index i = 0; i < nc.extents.size(); ++i)
        if (nc.classes[i] == NodeClass::Boundary) boundary_index_.push_back(i);
    if (boundary_index_.empty()) return;
    const std::vector<double> st = gather_element_stencils(form, nc, &boundary_index_);
    boundary_stencil_.assign(st.begin(), st.end());
}

template <typename Scalar>
const Scalar* OnTheFlyOperator<Scalar>::stored_stencil(Index node) const {
    auto it = std::lower_bound(boundary_index_.begin(), boundary_index_.end(), node);
    return boundary_stencil_.data() + static_cast<std::size_t>(it - boundary_index_.begin()) * stencil_size();
}

template <typename Scalar>
double OnTheFlyOperator<Scalar>::storage_bytes() const {
    double b = static_cast<double>(boundary_stencil_.size()) * sizeof(Scalar) +
               static_cast<double>(boundary_index_.size()) * sizeof(Index) +
               static_cast<double>(this->nodes_.classes.size());
    for (int a = 0; a < kMaxDim; ++a)
        b += static_cast<double>(f_[a].size() + w_[a].size() + mass_[a].size() + face_lo_[a].size() +
                                 face_hi_[a].size()) * sizeof(Scalar);
    return b;
}

template <typename Scalar>
void OnTheFlyOperator<Scalar>::run(Mode mode, const Scalar* c, Scalar* out) const {
    const Extents& e = ext_;
    std::array<int, kMaxDim> nblk{};
    for (int a = 0; a < kMaxDim; ++a) nblk[a] = (e.n[a] + blocks_.extent[a] - 1) / blocks_.extent[a];
    const Index count = static_cast<Index>(nblk[0]) * nblk[1] * nblk[2];
    parallel_for(count, this->threads_, [&](Index b0, Index b1) {
        for (Index b = b0; b < b1; ++b) {
            const std::array<int, kMaxDim> bi{static_cast<int>(b / (nblk[1] * nblk[2])),
                                             static_cast<int>(b / nblk[2] % nblk[1]), static_cast<int>(b % nblk[2])};
            std::array<int, kMaxDim> lo{}, hi{};
            for (int a = 0; a < kMaxDim; ++a) {
                lo[a] = bi[a] * blocks_.extent[a];
                hi[a] = std::min(e.n[a], lo[a] + blocks_.extent[a]);
            }
            run_block(mode, lo, hi, c, out);
        }
    });
}

namespace {

template <typename Scalar>
struct BlockScratch {
    std::vector<Scalar> za, z3, gf, gw, fb, wb, cbuf, tsum;
};

template <typename Scalar>
BlockScratch<Scalar>& scratch() {
    thread_local BlockScratch<Scalar> s;
    return s;
}

}  // namespace

template <typename Scalar>
void OnTheFlyOperator<Scalar>::apply_fused(const std::array<int, kMaxDim>& lo, const std::array<int, kMaxDim>& B,
                                           int Q2, const Scalar* c, Scalar* out) const {
    // Stage 2 fused with the output contraction. For every coefficient row (q0, q1)
    // in the block halo, G[dm2][i2] = sum_dk2 F[p2][dm2][dk2] c[q0, q1, p2 + dk2 - r2]
    // is shared by all output nodes whose stencil covers that row.
    const NodeClassification& nc = this->nodes_;
    const Extents& e = ext_;
    const int kw0 = kw_[0], kw1 = kw_[1], kw2 = kw_[2], mw2 = mw_[2];
    const int r0 = axes_[0].k_radius, r1 = axes_[1].k_radius, r2 = axes_[2].k_radius;
    const int R0 = B[0] + 2 * r0, R1 = B[1] + 2 * r1, B2 = B[2];
    BlockScratch<Scalar>& sc = scratch<Scalar>();

    // Block-local tables [dm2][dk2][i2].
    sc.fb.resize(static_cast<std::size_t>(mw2) * kw2 * B2);
    sc.wb.resize(sc.fb.size());
    for (int i2 = 0; i2 < B2; ++i2) {
        const std::size_t base = static_cast<std::size_t>(lo[2] + i2) * kw2 * mw2;
        for (int x = 0; x < mw2 * kw2; ++x) {
            sc.fb[static_cast<std::size_t>(x) * B2 + i2] = ft2_[base + x];
            sc.wb[static_cast<std::size_t>(x) * B2 + i2] = wt2_[base + x];
        }
    }

    const std::size_t gsz = static_cast<std::size_t>(R0) * R1 * mw2 * B2;
    sc.gf.assign(gsz, Scalar(0));
    sc.gw.assign(gsz, Scalar(0));
    sc.cbuf.resize(static_cast<std::size_t>(B2) + 2 * r2);
    for (int a0 = 0; a0 < R0; ++a0) {
        const int q0 = lo[0] - r0 + a0;
        if (q0 < 0 || q0 >= e.n[0]) continue;
        for (int a1 = 0; a1 < R1; ++a1) {
            const int q1 = lo[1] - r1 + a1;
            if (q1 < 0 || q1 >= e.n[1]) continue;
            const Scalar* crow = c + e.index(q0, q1, 0);
            for (int x = 0; x < B2 + 2 * r2; ++x) {
                const int q2 = lo[2] - r2 + x;
                sc.cbuf[x] = (q2 >= 0 && q2 < e.n[2]) ? crow[q2] : Scalar(0);
            }
            Scalar* gf = sc.gf.data() + (static_cast<std::size_t>(a0) * R1 + a1) * mw2 * B2;
            Scalar* gw = sc.gw.data() + (gf - sc.gf.data());
            for (int dm2 = 0; dm2 < mw2; ++dm2)
                for (int dk2 = 0; dk2 < kw2; ++dk2) {
                    const Scalar* fr = sc.fb.data() + (static_cast<std::size_t>(dm2) * kw2 + dk2) * B2;
                    const Scalar* wr = sc.wb.data() + (static_cast<std::size_t>(dm2) * kw2 + dk2) * B2;
                    const Scalar* cr = sc.cbuf.data() + dk2;
                    Scalar* gfr = gf + static_cast<std::size_t>(dm2) * B2;
                    Scalar* gwr = gw + static_cast<std::size_t>(dm2) * B2;
                    for (int i2 = 0; i2 < B2; ++i2) {
                        gfr[i2] += fr[i2] * cr[i2];
                        gwr[i2] += wr[i2] * cr[i2];
                    }
                }
        }
    }

    sc.tsum.resize(B2);
    const std::vector<Scalar>& Za = sc.za;
    const std::vector<Scalar>& Z3 = sc.z3;
    for (int i0 = 0; i0 < B[0]; ++i0)
        for (int i1 = 0; i1 < B[1]; ++i1) {
            std::fill(sc.tsum.begin(), sc.tsum.end(), Scalar(0));
            Scalar* ts = sc.tsum.data();
            for (int dk0 = 0; dk0 < kw0; ++dk0)
                for (int dk1 = 0; dk1 < kw1; ++dk1) {
                    const std::size_t zoff = (((static_cast<std::size_t>(i0) * B[1] + i1) * kw0 + dk0) * kw1 + dk1) * Q2;
                    const std::size_t goff = (static_cast<std::size_t>(i0 + dk0) * R1 + (i1 + dk1)) * mw2 * B2;
                    for (int dm2 = 0; dm2 < mw2; ++dm2) {
                        const Scalar* za = Za.data() + zoff + dm2;
                        const Scalar* z3 = Z3.data() + zoff + dm2;
                        const Scalar* gf = sc.gf.data() + goff + static_cast<std::size_t>(dm2) * B2;
                        const Scalar* gw = sc.gw.data() + goff + static_cast<std::size_t>(dm2) * B2;
                        for (int i2 = 0; i2 < B2; ++i2) ts[i2] += za[i2] * gf[i2] + z3[i2] * gw[i2];
                    }
                }
            for (int i2 = 0; i2 < B2; ++i2) {
                const std::array<int, kMaxDim> p{lo[0] + i0, lo[1] + i1, lo[2] + i2};
                const Index node = e.index(p[0], p[1], p[2]);
                const NodeClass cls = nc.classes[node];
                if (cls == NodeClass::Inactive) {
                    out[node] = Scalar(0);
                } else if (cls == NodeClass::Boundary) {
                    out[node] = contract_stencil(stored_stencil(node), p, c);
                } else {
                    out[node] = ts[i2] + face_apply(p, c);
                }
            }
        }
}

template <typename Scalar>
Scalar OnTheFlyOperator<Scalar>::contract_stencil(const Scalar* stencil, const std::array<int, kMaxDim>& p,
                                                  const Scalar* c) const {
    const Extents& e = ext_;
    const int kw1 = kw_[1], kw2 = kw_[2];
    const std::array<int, kMaxDim> kr{axes_[0].k_radius, axes_[1].k_radius, axes_[2].k_radius};
    Scalar t(0);
    for (int dk0 = 0; dk0 < kw_[0]; ++dk0) {
        const int q0 = p[0] + dk0 - kr[0];
        if (q0 < 0 || q0 >= e.n[0]) continue;
        for (int dk1 = 0; dk1 < kw1; ++dk1) {
            const int q1 = p[1] + dk1 - kr[1];
            if (q1 < 0 || q1 >= e.n[1]) continue;
            const Scalar* arow = stencil + (dk0 * kw1 + dk1) * kw2;
            const int a2 = std::max(0, kr[2] - p[2]);
            const int b2 = std::min(kw2, e.n[2] - p[2] + kr[2]);
            const Index crow = e.index(q0, q1, 0) + p[2] - kr[2];
            for (int dk2 = a2; dk2 < b2; ++dk2) t += arow[dk2] * c[crow + dk2];
        }
    }
    return t;
}

template <typename Scalar>
Scalar OnTheFlyOperator<Scalar>::face_apply(const std::array<int, kMaxDim>& p, const Scalar* c) const {
    // sigma * face_scale * (face (x) mass (x) mass) contracted with c, per touching grid face.
    const Extents& e = ext_;
    const std::array<int, kMaxDim> kr{axes_[0].k_radius, axes_[1].k_radius, axes_[2].k_radius};
    Scalar total(0);
    for (int a = first_axis_; a < kMaxDim; ++a)
        for (int side = 0; side < 2; ++side) {
            const Scalar sigma = Scalar(edge_sigma_[a][side]);
            if (sigma == Scalar(0)) continue;
            const Scalar* fa = (side ? face_hi_[a] : face_lo_[a]).data() + static_cast<std::size_t>(p[a]) * kw_[a];
            bool touches = false;
            for (int dk = 0; dk < kw_[a]; ++dk) touches = touches || fa[dk] != Scalar(0);
            if (!touches) continue;
            std::array<const Scalar*, kMaxDim> t1d{};
            for (int b = 0; b < kMaxDim; ++b)
                t1d[b] = b == a ? fa : mass_[b].data() + static_cast<std::size_t>(p[b]) * kw_[b];
            Scalar s(0);
            for (int dk0 = 0; dk0 < kw_[0]; ++dk0) {
                const int q0 = p[0] + dk0 - kr[0];
                if (q0 < 0 || q0 >= e.n[0] || t1d[0][dk0] == Scalar(0)) continue;
                for (int dk1 = 0; dk1 < kw_[1]; ++dk1) {
                    const int q1 = p[1] + dk1 - kr[1];
                    if (q1 < 0 || q1 >= e.n[1] || t1d[1][dk1] == Scalar(0)) continue;
                    const Scalar w01 = t1d[0][dk0] * t1d[1][dk1];
                    const Index crow = e.index(q0, q1, 0) + p[2] - kr[2];
                    Scalar r(0);
                    for (int dk2 = 0; dk2 < kw_[2]; ++dk2) {
                        const int q2 = p[2] + dk2 - kr[2];
                        if (q2 < 0 || q2 >= e.n[2]) continue;
                        r += t1d[2][dk2] * c[crow + dk2];
                    }
                    s += w01 * r;
                }
            }
            total += sigma * Scalar(face_scale_[a]) * s;
        }
    return total;
}

template <typename Scalar>
void OnTheFlyOperator<Scalar>::run_block(Mode mode, const std::array<int, kMaxDim>& lo,
                                         const std::array<int, kMaxDim>& hi, const Scalar* c, Scalar* out) const {
    const NodeClassification& nc = this->nodes_;
    const Extents& e = ext_;
    const int ks = stencil_size();
    const std::array<int, kMaxDim> B{hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]};

    bool separable = false;
    for (int i = lo[0]; i < hi[0] && !separable; ++i)
        for (int j = lo[1]; j < hi[1] && !separable; ++j)
            for (int k = lo[2]; k < hi[2]; ++k) {
                const NodeClass cls = nc.classes[e.index(i, j, k)];
                if (cls == NodeClass::Interior || cls == NodeClass::Truncated) {
                    separable = true;
                    break;
                }
            }

    const int kw0 = kw_[0], kw1 = kw_[1], kw2 = kw_[2];
    const int mw0 = mw_[0], mw1 = mw_[1], mw2 = mw_[2];
    std::array<int, kMaxDim> mr{}, Q{}, qbase{};
    for (int a = 0; a < kMaxDim; ++a) {
        mr[a] = axes_[a].m_radius;
        Q[a] = B[a] + 2 * mr[a];
        qbase[a] = lo[a] - axes_[a].pad + axes_[a].pad_p - mr[a];
    }
    const Extents& fe = field_extents_;

    std::vector<Scalar>& Za = scratch<Scalar>().za;
    std::vector<Scalar>& Z3 = scratch<Scalar>().z3;
    thread_local std::vector<Scalar> Yf, Yc;
    if (separable) {
        // Stage 0: contract the parameter offset on axis 0. Layout [i0][dk0][q1][q2].
        const std::size_t ysz = static_cast<std::size_t>(B[0]) * kw0 * Q[1] * Q[2];
        Yf.assign(ysz, Scalar(0));
        Yc.assign(ysz, Scalar(0));
        thread_local std::vector<Scalar> Yw, Ym;
        Yw.assign(static_cast<std::size_t>(Q[1]) * Q[2], Scalar(0));
        Ym.assign(Yw.size(), Scalar(0));
        const int q1a = std::max(0, -qbase[1]), q1b = std::min(Q[1], fe.n[1] - qbase[1]);
        const int q2a = std::max(0, -qbase[2]), q2b = std::min(Q[2], fe.n[2] - qbase[2]);
        const Scalar s0 = Scalar(stiffness_scale_[0]), vol = Scalar(volume_);
        for (int i0 = 0; i0 < B[0]; ++i0) {
            const int p0 = lo[0] + i0;
            const Scalar* f0 = f_[0].data() + static_cast<std::size_t>(p0) * kw0 * mw0;
            const Scalar* w0 = w_[0].data() + static_cast<std::size_t>(p0) * kw0 * mw0;
            for (int dk0 = 0; dk0 < kw0; ++dk0) {
                Scalar* yf = Yf.data() + (static_cast<std::size_t>(i0) * kw0 + dk0) * Q[1] * Q[2];
                Scalar* yc = Yc.data() + (static_cast<std::size_t>(i0) * kw0 + dk0) * Q[1] * Q[2];
                std::fill(Yw.begin(), Yw.end(), Scalar(0));
                std::fill(Ym.begin(), Ym.end(), Scalar(0));
                for (int dm0 = 0; dm0 < mw0; ++dm0) {
                    const int q0 = qbase[0] + i0 + dm0;
                    if (q0 < 0 || q0 >= fe.n[0]) continue;
                    const Scalar af = f0[dk0 * mw0 + dm0];
                    const Scalar aw = w0[dk0 * mw0 + dm0];
                    if (af == Scalar(0) && aw == Scalar(0)) continue;
                    for (int iq1 = q1a; iq1 < q1b; ++iq1) {
                        const Index frow = fe.index(q0, qbase[1] + iq1, 0) + qbase[2];
                        const Scalar* dr = d_.data();
                        const Scalar* mr_ = mu_.data();
                        Scalar* yfr = yf + static_cast<std::size_t>(iq1) * Q[2];
                        Scalar* ywr = Yw.data() + static_cast<std::size_t>(iq1) * Q[2];
                        Scalar* ymr = Ym.data() + static_cast<std::size_t>(iq1) * Q[2];
                        for (int iq2 = q2a; iq2 < q2b; ++iq2) {
                            yfr[iq2] += af * dr[frow + iq2];
                            ywr[iq2] += aw * dr[frow + iq2];
                            ymr[iq2] += af * mr_[frow + iq2];
                        }
                    }
                }
                for (std::size_t x = 0; x < Yw.size(); ++x) yc[x] = s0 * Yw[x] + vol * Ym[x];
            }
        }

        // Stage 1: contract axis 1. Layout [i0][i1][dk0][dk1][q2].
        const std::size_t zsz = static_cast<std::size_t>(B[0]) * B[1] * kw0 * kw1 * Q[2];
        Za.assign(zsz, Scalar(0));
        Z3.assign(zsz, Scalar(0));
        const Scalar s1 = Scalar(stiffness_scale_[1]);
        for (int i0 = 0; i0 < B[0]; ++i0)
            for (int i1 = 0; i1 < B[1]; ++i1) {
                const int p1 = lo[1] + i1;
                const Scalar* f1 = f_[1].data() + static_cast<std::size_t>(p1) * kw1 * mw1;
                const Scalar* w1 = w_[1].data() + static_cast<std::size_t>(p1) * kw1 * mw1;
                for (int dk0 = 0; dk0 < kw0; ++dk0) {
                    const Scalar* yf = Yf.data() + (static_cast<std::size_t>(i0) * kw0 + dk0) * Q[1] * Q[2];
                    const Scalar* yc = Yc.data() + (static_cast<std::size_t>(i0) * kw0 + dk0) * Q[1] * Q[2];
                    for (int dk1 = 0; dk1 < kw1; ++dk1) {
                        Scalar* za = Za.data() +
                                     ((((static_cast<std::size_t>(i0) * B[1] + i1) * kw0 + dk0) * kw1 + dk1) * Q[2]);
                        Scalar* z3 = Z3.data() + (za - Za.data());
                        for (int dm1 = 0; dm1 < mw1; ++dm1) {
                            const Scalar a = f1[dk1 * mw1 + dm1];
                            const Scalar b = s1 * w1[dk1 * mw1 + dm1];
                            if (a == Scalar(0) && b == Scalar(0)) continue;
                            const Scalar* yfr = yf + static_cast<std::size_t>(i1 + dm1) * Q[2];
                            const Scalar* ycr = yc + static_cast<std::size_t>(i1 + dm1) * Q[2];
                            for (int iq2 = 0; iq2 < Q[2]; ++iq2) {
                                za[iq2] += a * ycr[iq2] + b * yfr[iq2];
                                z3[iq2] += a * yfr[iq2];
                            }
                        }
                    }
                }
            }
    }

    const std::array<int, kMaxDim> kr{axes_[0].k_radius, axes_[1].k_radius, axes_[2].k_radius};
    if (separable && mode == Mode::Apply) {
        apply_fused(lo, B, Q[2], c, out);
        return;
    }

    // Stage 2 per node, then faces and output.
    std::vector<Scalar> A(ks);
    for (int i0 = 0; i0 < B[0]; ++i0)
        for (int i1 = 0; i1 < B[1]; ++i1)
            for (int i2 = 0; i2 < B[2]; ++i2) {
                const std::array<int, kMaxDim> p{lo[0] + i0, lo[1] + i1, lo[2] + i2};
                const Index node = e.index(p[0], p[1], p[2]);
                const NodeClass cls = nc.classes[node];
                const Scalar* stencil = A.data();
                if (cls == NodeClass::Inactive) {
                    if (mode == Mode::Apply) out[node] = Scalar(0);
                    if (mode == Mode::Diagonal) out[node] = Scalar(1);
                    if (mode == Mode::Stencil)
                        std::fill(out + static_cast<std::size_t>(node) * ks, out + static_cast<std::size_t>(node + 1) * ks,
                                  Scalar(0));
                    continue;
                }
                if (cls == NodeClass::Boundary) {
                    stencil = stored_stencil(node);
                } else {
                    // Transposed tables [dm2][dk2], w pre-scaled: the inner loop runs over dk2.
                    const Scalar* f2 = ft2_.data() + static_cast<std::size_t>(p[2]) * kw2 * mw2;
                    const Scalar* w2 = wt2_.data() + static_cast<std::size_t>(p[2]) * kw2 * mw2;
                    for (int dk0 = 0; dk0 < kw0; ++dk0)
                        for (int dk1 = 0; dk1 < kw1; ++dk1) {
                            const std::size_t zoff =
                                ((((static_cast<std::size_t>(i0) * B[1] + i1) * kw0 + dk0) * kw1 + dk1) * Q[2]) + i2;
                            const Scalar* za = Za.data() + zoff;
                            const Scalar* z3 = Z3.data() + zoff;
                            Scalar* arow = A.data() + (dk0 * kw1 + dk1) * kw2;
                            std::fill(arow, arow + kw2, Scalar(0));
                            for (int dm2 = 0; dm2 < mw2; ++dm2) {
                                const Scalar a = za[dm2], b = z3[dm2];
                                const Scalar* fr = f2 + dm2 * kw2;
                                const Scalar* wr = w2 + dm2 * kw2;
                                for (int dk2 = 0; dk2 < kw2; ++dk2) arow[dk2] += a * fr[dk2] + b * wr[dk2];
                            }
                        }
                    // Surface terms on the faces of the grid box.
                    for (int a = first_axis_; a < kMaxDim; ++a) {
                        for (int side = 0; side < 2; ++side) {
                            const Scalar sigma = Scalar(edge_sigma_[a][side]);
                            if (sigma == Scalar(0)) continue;
                            const Scalar* fa = (side ? face_hi_[a] : face_lo_[a]).data() +
                                               static_cast<std::size_t>(p[a]) * kw_[a];
                            bool touches = false;
                            for (int dk = 0; dk < kw_[a]; ++dk) touches = touches || fa[dk] != Scalar(0);
                            if (!touches) continue;
                            const Scalar scale = sigma * Scalar(face_scale_[a]);
                            for (int dk0 = 0; dk0 < kw0; ++dk0)
                                for (int dk1 = 0; dk1 < kw1; ++dk1)
                                    for (int dk2 = 0; dk2 < kw2; ++dk2) {
                                        const std::array<int, kMaxDim> dk{dk0, dk1, dk2};
                                        Scalar v = scale;
                                        for (int b = 0; b < kMaxDim; ++b)
                                            v *= b == a ? fa[dk[b]]
                                                        : mass_[b][static_cast<std::size_t>(p[b]) * kw_[b] + dk[b]];
                                        A[(dk0 * kw1 + dk1) * kw2 + dk2] += v;
                                    }
                        }
                    }
                }

                if (mode == Mode::Diagonal) {
                    out[node] = stencil[(kr[0] * kw1 + kr[1]) * kw2 + kr[2]];
                } else if (mode == Mode::Stencil) {
                    std::copy(stencil, stencil + ks, out + static_cast<std::size_t>(node) * ks);
                } else {
                    out[node] = contract_stencil(stencil, p, c);
                }
            }
}

template <typename Scalar>
void OnTheFlyOperator<Scalar>::apply_active(const Vector& c, Vector& t) const {
    run(Mode::Apply, c.data(), t.data());
}

template <typename Scalar>
typename OnTheFlyOperator<Scalar>::Vector OnTheFlyOperator<Scalar>::diagonal() const {
    Vector d(this->size());
    run(Mode::Diagonal, nullptr, d.data());
    return d;
}

template <typename Scalar>
void OnTheFlyOperator<Scalar>::stencils(Scalar* out) const {
    run(Mode::Stencil, nullptr, out);
}

template <typename Scalar>
OpStats OnTheFlyOperator<Scalar>::stats() const {
    // Fused multiply-adds of the implemented schedule, summed over blocks.
    const Extents& e = ext_;
    double fma = 0.0;
    for (int b0 = 0; b0 < e.n[0]; b0 += blocks_.extent[0])
        for (int b1 = 0; b1 < e.n[1]; b1 += blocks_.extent[1])
            for (int b2 = 0; b2 < e.n[2]; b2 += blocks_.extent[2]) {
                const double B0 = std::min(blocks_.extent[0], e.n[0] - b0);
                const double B1 = std::min(blocks_.extent[1], e.n[1] - b1);
                const double B2 = std::min(blocks_.extent[2], e.n[2] - b2);
                const double Q1 = B1 + mw_[1] - 1, Q2 = B2 + mw_[2] - 1;
                fma += B0 * kw_[0] * (3.0 * mw_[0] + 2.0) * Q1 * Q2;
                fma += B0 * B1 * kw_[0] * kw_[1] * mw_[1] * 3.0 * Q2;
                // Fused stage 2: row partials G over the block halo, then the per-node sum.
                fma += (B0 + kw_[0] - 1) * (B1 + kw_[1] - 1) * B2 * mw_[2] * kw_[2] * 2.0;
                fma += B0 * B1 * B2 * kw_[0] * kw_[1] * mw_[2] * 2.0;
            }
    fma += static_cast<double>(boundary_index_.size()) * stencil_size();
    OpStats s;
    s.flops = 2.0 * fma;
    s.bytes_read = (static_cast<double>(e.size()) + 2.0 * field_extents_.size()) * sizeof(Scalar);
    s.bytes_written = static_cast<double>(e.size()) * sizeof(Scalar);
    return s;
}

// ---------------------------------------------------------------------------------------------
// BlockTensorOperator

template <typename Scalar>
double BlockTensorOperator<Scalar>::required_bytes(const FormData& form) {
    const auto kw = stencil_widths(form);
    return static_cast<double>(coefficient_extents(form.domain.grid(), form.nb).size()) * kw[0] * kw[1] * kw[2] *
           sizeof(Scalar);
}

template <typename Scalar>
BlockTensorOperator<Scalar>::BlockTensorOperator(const FormData& form, double memory_budget)
    : SystemOperator<Scalar>(classify_nodes(form.domain, form.nb)) {
    check_form(form);
    check_budget(required_bytes(form), memory_budget, "block tensor");
    kw_ = stencil_widths(form);
    ks_ = kw_[0] * kw_[1] * kw_[2];
    const OnTheFlyOperator<Scalar> otf(form);
    stencils_.resize(static_cast<std::size_t>(this->size()) * ks_);
    otf.stencils(stencils_.data());
}

template <typename Scalar>
void BlockTensorOperator<Scalar>::apply_active(const Vector& c, Vector& t) const {
    const Extents& e = this->nodes_.extents;
    std::array<int, kMaxDim> kr{};
    for (int a = 0; a < kMaxDim; ++a) kr[a] = kw_[a] / 2;
    parallel_for(e.size(), this->threads_, [&](Index n0, Index n1) {
        for (Index node = n0; node < n1; ++node) {
            if (!this->nodes_.is_active(node)) {
                t[node] = Scalar(0);
                continue;
            }
            const int p0 = static_cast<int>(node / (static_cast<Index>(e.n[1]) * e.n[2]));
            const int p1 = static_cast<int>(node / e.n[2] % e.n[1]);
            const int p2 = static_cast<int>(node % e.n[2]);
            const Scalar* st = stencils_.data() + static_cast<std::size_t>(node) * ks_;
            Scalar s(0);
            for (int dk0 = 0; dk0 < kw_[0]; ++dk0) {
                const int q0 = p0 + dk0 - kr[0];
                if (q0 < 0 || q0 >= e.n[0]) continue;
                for (int dk1 = 0; dk1 < kw_[1]; ++dk1) {
                    const int q1 = p1 + dk1 - kr[1];
                    if (q1 < 0 || q1 >= e.n[1]) continue;
                    const Scalar* arow = st + (dk0 * kw_[1] + dk1) * kw_[2];
                    const int a2 = std::max(0, kr[2] - p2);
                    const int b2 = std::min(kw_[2], e.n[2] - p2 + kr[2]);
                    const Index crow = e.index(q0, q1, 0) + p2 - kr[2];
                    for (int dk2 = a2; dk2 < b2; ++dk2) s += arow[dk2] * c[crow + dk2];
                }
            }
            t[node] = s;
        }
    });
}

template <typename Scalar>
typename BlockTensorOperator<Scalar>::Vector BlockTensorOperator<Scalar>::diagonal() const {
    Vector d(this->size());
    const int center = ks_ / 2;
    for (Index i = 0; i < d.size(); ++i)
        d[i] = this->nodes_.is_active(i) ? stencils_[static_cast<std::size_t>(i) * ks_ + center] : Scalar(1);
    return d;
}

template <typename Scalar>
OpStats BlockTensorOperator<Scalar>::stats() const {
    OpStats s;
    const double n = static_cast<double>(this->size());
    s.flops = 2.0 * static_cast<double>(this->nodes_.active()) * ks_;
    s.bytes_read = (n * ks_ + n) * sizeof(Scalar);
    s.bytes_written = n * sizeof(Scalar);
    return s;
}

template <typename Scalar>
double BlockTensorOperator<Scalar>::storage_bytes() const {
    return static_cast<double>(stencils_.size()) * sizeof(Scalar) + static_cast<double>(this->nodes_.classes.size());
}

// ---------------------------------------------------------------------------------------------
// Sparse

Eigen::SparseMatrix<double, Eigen::RowMajor, int> assemble_matrix(const FormData& form, const NodeClassification& nodes,
                                                                 double memory_budget) {
    check_form(form);
    const auto kw = stencil_widths(form);
    const int ks = kw[0] * kw[1] * kw[2];
    const Extents& e = nodes.extents;
    check_budget(static_cast<double>(e.size()) * ks * (2 * sizeof(double) + sizeof(int)), memory_budget,
                 "sparse assembly");
    const std::vector<double> st = gather_element_stencils(form, nodes, nullptr);
    std::array<int, kMaxDim> kr{};
    for (int a = 0; a < kMaxDim; ++a) kr[a] = kw[a] / 2;

    Eigen::SparseMatrix<double, Eigen::RowMajor, int> m(e.size(), e.size());
    Eigen::VectorXi per_row = Eigen::VectorXi::Zero(e.size());
    for (Index r = 0; r < e.size(); ++r)
        if (nodes.is_active(r)) per_row[r] = ks;
    m.reserve(per_row);
    for (int p0 = 0; p0 < e.n[0]; ++p0)
        for (int p1 = 0; p1 < e.n[1]; ++p1)
            for (int p2 = 0; p2 < e.n[2]; ++p2) {
                const Index r = e.index(p0, p1, p2);
                if (!nodes.is_active(r)) continue;
                const double* row = st.data() + static_cast<std::size_t>(r) * ks;
                for (int dk0 = 0; dk0 < kw[0]; ++dk0)
                    for (int dk1 = 0; dk1 < kw[1]; ++dk1)
                        for (int dk2 = 0; dk2 < kw[2]; ++dk2) {
                            const int q0 = p0 + dk0 - kr[0], q1 = p1 + dk1 - kr[1], q2 = p2 + dk2 - kr[2];
                            if (q0 < 0 || q1 < 0 || q2 < 0 || q0 >= e.n[0] || q1 >= e.n[1] || q2 >= e.n[2]) continue;
                            const Index col = e.index(q0, q1, q2);
                            if (!nodes.is_active(col)) continue;
                            m.insert(r, col) = row[(dk0 * kw[1] + dk1) * kw[2] + dk2];
                        }
            }
    m.makeCompressed();
    return m;
}

template <typename Scalar>
SparseOperator<Scalar>::SparseOperator(const FormData& form, double memory_budget)
    : SystemOperator<Scalar>(classify_nodes(form.domain, form.nb)) {
    matrix_ = assemble_matrix(form, this->nodes_, memory_budget).template cast<Scalar>();
}

template <typename Scalar>
void SparseOperator<Scalar>::apply_active(const Vector& c, Vector& t) const {
    const int* outer = matrix_.outerIndexPtr();
    const int* inner = matrix_.innerIndexPtr();
    const Scalar* val = matrix_.valuePtr();
    parallel_for(matrix_.rows(), this->threads_, [&](Index r0, Index r1) {
        for (Index r = r0; r < r1; ++r) {
            Scalar s(0);
            for (int k = outer[r]; k < outer[r + 1]; ++k) s += val[k] * c[inner[k]];
            t[r] = s;
        }
    });
}

template <typename Scalar>
typename SparseOperator<Scalar>::Vector SparseOperator<Scalar>::diagonal() const {
    Vector d = matrix_.diagonal();
    for (Index i = 0; i < d.size(); ++i)
        if (!this->nodes_.is_active(i)) d[i] = Scalar(1);
    return d;
}

template <typename Scalar>
OpStats SparseOperator<Scalar>::stats() const {
    OpStats s;
    const double nnz = static_cast<double>(matrix_.nonZeros());
    const double n = static_cast<double>(this->size());
    s.flops = 2.0 * nnz;
    s.bytes_read = nnz * (sizeof(Scalar) + sizeof(int)) + (n + 1) * sizeof(int) + n * sizeof(Scalar);
    s.bytes_written = n * sizeof(Scalar);
    return s;
}

template <typename Scalar>
double SparseOperator<Scalar>::storage_bytes() const {
    return static_cast<double>(matrix_.nonZeros()) * (sizeof(Scalar) + sizeof(int)) +
           static_cast<double>(matrix_.rows() + 1) * sizeof(int);
}

template <typename Scalar>
std::unique_ptr<SystemOperator<Scalar>> make_operator(Strategy strategy, const FormData& form, double memory_budget) {
    switch (strategy) {
        case Strategy::OnTheFly: return std::make_unique<OnTheFlyOperator<Scalar>>(form);
        case Strategy::BlockTensor: return std::make_unique<BlockTensorOperator<Scalar>>(form, memory_budget);
        case Strategy::Sparse: return std::make_unique<SparseOperator<Scalar>>(form, memory_budget);
    }
    throw Error(ErrorKind::Configuration, "unknown strategy");
}

template class SystemOperator<float>;
template class SystemOperator<double>;
template class OnTheFlyOperator<float>;
template class OnTheFlyOperator<double>;
template class BlockTensorOperator<float>;
template class BlockTensorOperator<double>;
template class SparseOperator<float>;
template class SparseOperator<double>;
template std::unique_ptr<SystemOperator<float>> make_operator<float>(Strategy, const FormData&, double);
template std::unique_ptr<SystemOperator<double>> make_operator<double>(Strategy, const FormData&, double);

}  // namespace tbs
