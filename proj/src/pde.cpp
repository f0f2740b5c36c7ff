#include "tbs/pde.hpp"

#include <algorithm>
#include <chrono>

#include "tbs/bspline.hpp"
#include "tbs/kernels.hpp"
#include "tbs/parallel.hpp"

namespace tbs {

Precision parse_precision(const std::string& name) {
    if (name == "double" || name == "f64") return Precision::Double;
    if (name == "single" || name == "float" || name == "f32") return Precision::Single;
    throw Error(ErrorKind::Configuration, "unknown precision '" + name + "'");
}

const char* to_string(Precision p) { return p == Precision::Single ? "single" : "double"; }

FieldInput FieldInput::constant(double v) {
    FieldInput f;
    f.kind = Kind::Constant;
    f.value = v;
    return f;
}

FieldInput FieldInput::sampled(CoeffTensor node_samples) {
    FieldInput f;
    f.kind = Kind::Samples;
    f.samples = std::move(node_samples);
    return f;
}

FieldInput FieldInput::analytic(PointFunction fn, std::string tag) {
    FieldInput f;
    f.kind = Kind::Analytic;
    f.function = std::move(fn);
    f.tag = std::move(tag);
    return f;
}

BCKind parse_bc_kind(const std::string& name) {
    if (name == "neumann") return BCKind::Neumann;
    if (name == "robin") return BCKind::Robin;
    if (name == "penalty" || name == "dirichlet" || name == "dirichlet-penalty") return BCKind::DirichletPenalty;
    if (name == "cauchy") return BCKind::Cauchy;
    if (name == "mixed") return BCKind::Mixed;
    throw Error(ErrorKind::Configuration, "unknown boundary condition '" + name + "'");
}

void ProblemSpec::set_all_faces(const BoundaryCondition& bc) {
    for (auto& axis : faces) axis = {bc, bc};
    mask_bc = bc;
}

namespace {

void check_bc(const BoundaryCondition& bc, bool mask) {
    switch (bc.kind) {
        case BCKind::Neumann: return;
        case BCKind::Robin:
            if (mask) {
                throw Error(ErrorKind::Configuration,
                            "mask domains support only penalty and Neumann boundary conditions");
            }
            if (!(bc.gamma > 0.0)) throw Error(ErrorKind::Configuration, "Robin gamma must be positive");
            return;
        case BCKind::DirichletPenalty:
            if (bc.epsilon < 0.0) throw Error(ErrorKind::Configuration, "penalty epsilon must be positive");
            return;
        case BCKind::Cauchy:
        case BCKind::Mixed:
            throw Error(ErrorKind::Configuration, "Cauchy and mixed boundary conditions are not realized");
    }
}

void check_field(const FieldInput& f, const Grid& g, const char* name, bool nonnegative) {
    switch (f.kind) {
        case FieldInput::Kind::Constant:
            if (!std::isfinite(f.value)) throw Error(ErrorKind::InputValidation, std::string(name) + " is not finite");
            if (nonnegative && f.value < 0.0) {
                throw Error(ErrorKind::InputValidation, std::string(name) + " must be non-negative");
            }
            return;
        case FieldInput::Kind::Samples:
            if (!(f.samples.extents == g.node_extents())) {
                throw Error(ErrorKind::ExtentMismatch, std::string(name) + " samples " + to_string(f.samples.extents) +
                                                           " do not cover grid nodes " + to_string(g.node_extents()));
            }
            require_finite(f.samples, name);
            if (nonnegative && f.samples.data.minCoeff() < 0.0) {
                throw Error(ErrorKind::InputValidation, std::string(name) + " samples must be non-negative");
            }
            return;
        case FieldInput::Kind::Analytic:
            if (!f.function) throw Error(ErrorKind::InputValidation, std::string(name) + " has no function");
            return;
    }
}

double min_step(const Grid& g) {
    double h = g.step[0];
    for (int a = 1; a < g.dim; ++a) h = std::min(h, g.step[a]);
    return h;
}

FaceCoefficients face_coefficients(const BoundaryCondition& bc, const Grid& g) {
    switch (bc.kind) {
        case BCKind::Neumann: return {0.0, 0.0};
        case BCKind::Robin: return {1.0 / (2.0 * bc.gamma), bc.g / (2.0 * bc.gamma)};
        case BCKind::DirichletPenalty: {
            const double eps = bc.epsilon > 0.0 ? bc.epsilon : 1e-4 * min_step(g);
            return {1.0 / eps, bc.g / eps};
        }
        default: break;
    }
    throw Error(ErrorKind::Configuration, "unsupported boundary condition");
}

CoeffTensor node_samples(const FieldInput& f, const Grid& g) {
    if (f.kind == FieldInput::Kind::Samples) return f.samples;
    CoeffTensor s(g.node_extents());
    for (int i = 0; i < g.nodes[0]; ++i)
        for (int j = 0; j < g.nodes[1]; ++j)
            for (int k = 0; k < g.nodes[2]; ++k)
                s(i, j, k) = f.function({g.coordinate(0, i), g.coordinate(1, j), g.coordinate(2, k)});
    require_finite(s, "analytic field samples");
    return s;
}

SplineField to_spline(const FieldInput& f, const Grid& g, int degree) {
    if (f.kind == FieldInput::Kind::Constant) return constant_field(g, degree, f.value);
    const CoeffTensor c = direct_transform(node_samples(f, g), BSplineBasis(degree, g.dim, g.step));
    return pad_mirror(c, g, degree);
}

Index clamp_negative(SplineField& f) {
    Index n = 0;
    for (Index i = 0; i < f.coeffs.size(); ++i) {
        if (f.coeffs.data[i] < 0.0) {
            f.coeffs.data[i] = 0.0;
            ++n;
        }
    }
    return n;
}

/// Orthogonal projection of an analytic function onto the degree-n spline space of the grid box.
SplineField project_l2(const PointFunction& fn, const Grid& g, int degree) {
    const Domain box = Domain::box(g);
    const FormData mass{box, degree, 0, constant_field(g, 0, 0.0), constant_field(g, 0, 1.0), SurfaceModel{}};
    const Extents ext = coefficient_extents(g, degree);
    const int pad = coefficient_pad(degree);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(ext.size());
    const QuadratureRule rule = gauss_rule(std::min(16, degree + 4));
    double vol = 1.0;
    for (int a = 0; a < g.dim; ++a) vol *= g.step[a];
    // Two half-cells per cell on each axis.
    std::array<std::vector<double>, kMaxDim> u, w;
    for (int a = 0; a < kMaxDim; ++a) {
        if (a >= g.dim) {
            u[a] = {0.0};
            w[a] = {1.0};
            continue;
        }
        for (int c = 0; c < g.nodes[a] - 1; ++c)
            for (int half = 0; half < 2; ++half)
                for (int q = 0; q < rule.size(); ++q) {
                    u[a].push_back(c + 0.5 * (half + rule.nodes[q]));
                    w[a].push_back(0.5 * rule.weights[q]);
                }
    }
    std::array<std::array<double, kMaxDegree + 1>, kMaxDim> bw{};
    std::array<int, kMaxDim> first{0, 0, 0}, cnt{1, 1, 1};
    for (std::size_t i = 0; i < u[0].size(); ++i)
        for (std::size_t j = 0; j < u[1].size(); ++j)
            for (std::size_t k = 0; k < u[2].size(); ++k) {
                const std::array<double, kMaxDim> uu{u[0][i], u[1][j], u[2][k]};
                const double val = fn({g.coordinate(0, uu[0]), g.coordinate(1, uu[1]), g.coordinate(2, uu[2])}) *
                                   w[0][i] * w[1][j] * w[2][k] * vol;
                for (int a = 0; a < kMaxDim; ++a) {
                    if (a >= g.dim) {
                        bw[a][0] = 1.0;
                        first[a] = 0;
                        cnt[a] = 1;
                        continue;
                    }
                    first[a] = bspline_weights(degree, uu[a], bw[a]) + pad;
                    cnt[a] = degree + 1;
                }
                for (int x = 0; x < cnt[0]; ++x)
                    for (int y = 0; y < cnt[1]; ++y)
                        for (int z = 0; z < cnt[2]; ++z) {
                            const int p0 = first[0] + x, p1 = first[1] + y, p2 = first[2] + z;
                            if (p0 < 0 || p1 < 0 || p2 < 0 || p0 >= ext.n[0] || p1 >= ext.n[1] || p2 >= ext.n[2]) continue;
                            b[ext.index(p0, p1, p2)] += val * bw[0][x] * bw[1][y] * bw[2][z];
                        }
            }
    Eigen::VectorXd c;
    direct_solve(mass, b, c);
    SplineField f = constant_field(g, degree, 0.0);
    f.coeffs.data = c;
    return f;
}

}  // namespace

void ProblemSpec::validate() const {
    check_degree(nb);
    check_degree(param_degree());
    check_degree(source_degree());
    const Grid& g = domain.grid();
    if (domain.is_box()) {
        for (int a = 0; a < g.dim; ++a)
            for (const auto& bc : faces[a]) check_bc(bc, false);
    } else {
        check_bc(mask_bc, true);
    }
    check_field(diffusion, g, "diffusion", true);
    check_field(absorption, g, "absorption", true);
    check_field(source, g, "source", false);
    if (source_mode == SourceMode::Projection && source.kind != FieldInput::Kind::Analytic) {
        throw Error(ErrorKind::Configuration, "L2 projection of the source needs an analytic source");
    }
}

InputFields transform_inputs(const ProblemSpec& spec) {
    spec.validate();
    const Grid& g = spec.domain.grid();
    InputFields in;
    in.d = to_spline(spec.diffusion, g, spec.param_degree());
    in.mu = to_spline(spec.absorption, g, spec.param_degree());
    in.clamped_d = clamp_negative(in.d);
    in.clamped_mu = clamp_negative(in.mu);
    if (spec.source_mode == SourceMode::Projection) {
        in.q = project_l2(spec.source.function, g, spec.source_degree());
    } else {
        in.q = to_spline(spec.source, g, spec.source_degree());
    }
    return in;
}

SurfaceModel realize_bc(const ProblemSpec& spec) {
    const Grid& g = spec.domain.grid();
    if (!spec.domain.is_box()) {
        check_bc(spec.mask_bc, true);
        return SurfaceModel::uniform(face_coefficients(spec.mask_bc, g));
    }
    SurfaceModel s;
    for (int a = 0; a < g.dim; ++a)
        for (int side = 0; side < 2; ++side) {
            check_bc(spec.faces[a][side], false);
            s.edge[a][side] = face_coefficients(spec.faces[a][side], g);
        }
    return s;
}

Eigen::VectorXd assemble_rhs(const Domain& domain, int nb, const SplineField& q, const SurfaceModel& surface,
                             const NodeClassification& nodes) {
    const Grid& g = domain.grid();
    if (!(q.coeffs.extents == coefficient_extents(g, q.degree))) {
        throw Error(ErrorKind::ExtentMismatch, "source coefficients do not match the grid");
    }
    if (!(nodes.extents == coefficient_extents(g, nb))) {
        throw Error(ErrorKind::ExtentMismatch, "node classification does not match the basis grid");
    }
    const Extents& e = nodes.extents;
    Eigen::VectorXd t = Eigen::VectorXd::Zero(e.size());
    std::array<AxisKernels, kMaxDim> ax;
    double vol = 1.0;
    for (int a = 0; a < g.dim; ++a) vol *= g.step[a];
    std::array<double, kMaxDim> face_scale{0.0, 0.0, 0.0};
    for (int a = 0; a < kMaxDim; ++a) {
        ax[a] = build_axis_kernels(g.nodes[a], a < g.dim, g.step[a], nb, 0, q.degree);
        if (a < g.dim) face_scale[a] = vol / g.step[a];
    }

    parallel_for(e.n[0], 0, [&](Index i0, Index i1) {
        for (int p0 = static_cast<int>(i0); p0 < i1; ++p0)
            for (int p1 = 0; p1 < e.n[1]; ++p1)
                for (int p2 = 0; p2 < e.n[2]; ++p2) {
                    const Index node = e.index(p0, p1, p2);
                    const NodeClass cls = nodes.classes[node];
                    if (cls != NodeClass::Interior && cls != NodeClass::Truncated) continue;
                    const std::array<int, kMaxDim> p{p0, p1, p2};
                    std::array<long, kMaxDim> l{};
                    for (int a = 0; a < kMaxDim; ++a) l[a] = p[a] - ax[a].pad;
                    double s = 0.0;
                    const int r0 = ax[0].s_radius, r1 = ax[1].s_radius, r2 = ax[2].s_radius;
                    const double* s0 = ax[0].source.data() + static_cast<std::size_t>(p0) * ax[0].s_width();
                    const double* s1 = ax[1].source.data() + static_cast<std::size_t>(p1) * ax[1].s_width();
                    const double* s2 = ax[2].source.data() + static_cast<std::size_t>(p2) * ax[2].s_width();
                    for (int d0 = -r0; d0 <= r0; ++d0) {
                        const double w0 = s0[d0 + r0];
                        if (w0 == 0.0) continue;
                        for (int d1 = -r1; d1 <= r1; ++d1) {
                            const double w1 = w0 * s1[d1 + r1];
                            if (w1 == 0.0) continue;
                            for (int d2 = -r2; d2 <= r2; ++d2)
                                s += w1 * s2[d2 + r2] * q.at(l[0] + d0, l[1] + d1, l[2] + d2);
                        }
                    }
                    s *= vol;
                    for (int a = 0; a < g.dim; ++a)
                        for (int side = 0; side < 2; ++side) {
                            const double flux = surface.edge[a][side].flux;
                            if (flux == 0.0) continue;
                            const double x = side ? g.nodes[a] - 1.0 : 0.0;
                            const double fv = eval_bspline(nb, x - l[a]);
                            if (fv == 0.0) continue;
                            double v = flux * face_scale[a] * fv;
                            for (int b = 0; b < kMaxDim; ++b)
                                if (b != a) v *= ax[b].integral[p[b]];
                            s += v;
                        }
                    t[node] = s;
                }
    });

    if (nodes.boundary == 0) return t;
    const ElementContext ctx = make_element_context(g, nb, 0, q.degree);
    const int L = ctx.local_count();
    std::vector<std::array<int, kMaxDim>> offs(L);
    for (int i = 0; i < L; ++i) offs[i] = ctx.local_offsets(i);
    std::array<int, kMaxDim> pad{0, 0, 0};
    for (int a = 0; a < g.dim; ++a) pad[a] = nodes.pad;
    std::vector<Index> node(L);
    Eigen::VectorXd v;
    const Extents& ce = domain.cells();
    for (int i = 0; i < ce.n[0]; ++i)
        for (int j = 0; j < ce.n[1]; ++j)
            for (int k = 0; k < ce.n[2]; ++k) {
                if (!domain.occupied(i, j, k)) continue;
                const std::array<int, kMaxDim> cell{i, j, k};
                bool any = false;
                for (int r = 0; r < L; ++r) {
                    node[r] = e.index(cell[0] + offs[r][0] + pad[0], cell[1] + offs[r][1] + pad[1],
                                      cell[2] + offs[r][2] + pad[2]);
                    any = any || nodes.classes[node[r]] == NodeClass::Boundary;
                }
                if (!any) continue;
                element_vector(ctx, q, cell, v);
                for (const BoundaryFace& f : boundary_faces(domain, surface, cell))
                    add_face_vector(ctx, f.axis, f.side, f.coeffs.flux, v);
                for (int r = 0; r < L; ++r)
                    if (nodes.classes[node[r]] == NodeClass::Boundary) t[node[r]] += v[r];
            }
    return t;
}

template <typename Scalar>
AssembledSystem<Scalar> assemble_system(const ProblemSpec& spec, double memory_budget) {
    InputFields in = transform_inputs(spec);
    SurfaceModel surface = realize_bc(spec);
    AssembledSystem<Scalar> sys{FormData{spec.domain, spec.nb, spec.param_degree(), in.d, in.mu, surface}, in, nullptr,
                                {}};
    sys.op = make_operator<Scalar>(spec.strategy, sys.form, memory_budget);
    sys.rhs = assemble_rhs(spec.domain, spec.nb, in.q, surface, sys.op->nodes()).template cast<Scalar>();
    return sys;
}

template AssembledSystem<float> assemble_system<float>(const ProblemSpec&, double);
template AssembledSystem<double> assemble_system<double>(const ProblemSpec&, double);

namespace {

SplineField restrict_field(const SplineField& fine, const Grid& coarse) {
    const Grid& fg = fine.grid;
    CoeffTensor s(coarse.node_extents());
    for (int i = 0; i < coarse.nodes[0]; ++i)
        for (int j = 0; j < coarse.nodes[1]; ++j)
            for (int k = 0; k < coarse.nodes[2]; ++k) {
                std::array<double, kMaxDim> x{coarse.coordinate(0, i), coarse.coordinate(1, j), coarse.coordinate(2, k)};
                for (int a = 0; a < fg.dim; ++a) x[a] = std::min(x[a], fg.coordinate(a, fg.nodes[a] - 1));
                s(i, j, k) = fine.evaluate(x);
            }
    const CoeffTensor c = direct_transform(s, BSplineBasis(fine.degree, coarse.dim, coarse.step));
    return pad_mirror(c, coarse, fine.degree);
}

}  // namespace

Eigen::VectorXd coarse_initialize(const ProblemSpec& spec, const InputFields& fine_inputs, int factor,
                                  const SolveConfig& config, int* coarse_iterations, std::vector<std::string>* notes) {
    if (factor < 2) throw Error(ErrorKind::Configuration, "coarse factor must be at least 2");
    const Grid& fg = spec.domain.grid();
    const Domain cd = spec.domain.coarsen(factor);
    const Grid& cg = cd.grid();
    for (int a = 0; a < fg.dim; ++a) {
        const int cells = fg.nodes[a] - 1;
        if (cells % factor != 0 && notes) {
            notes->push_back("coarse grid axis " + std::to_string(a) + " padded from " + std::to_string(cells) + " to " +
                             std::to_string((cg.nodes[a] - 1) * factor) + " fine cells");
        }
        if (cg.nodes[a] < 2) throw Error(ErrorKind::Configuration, "coarse grid has fewer than 2 nodes on an axis");
    }
    SplineField d = restrict_field(fine_inputs.d, cg);
    SplineField mu = restrict_field(fine_inputs.mu, cg);
    const SplineField q = restrict_field(fine_inputs.q, cg);
    clamp_negative(d);
    clamp_negative(mu);
    const SurfaceModel surface = realize_bc(spec);
    const FormData form{cd, spec.nb, spec.param_degree(), d, mu, surface};
    const OnTheFlyOperator<double> op(form);
    const Eigen::VectorXd b = assemble_rhs(cd, spec.nb, q, surface, op.nodes());
    SolveConfig cc = config;
    cc.coarse_factor = 0;
    cc.record_history = false;
    Eigen::VectorXd xc;
    const SolveReport rep = pcg(op, b, xc, cc);
    if (coarse_iterations) *coarse_iterations = rep.iterations;

    SplineField coarse = constant_field(cg, spec.nb, 0.0);
    coarse.coeffs.data = xc;
    // Interpolate the coarse spline at every fine padded position.
    const int pad = coefficient_pad(spec.nb);
    const Extents fe = coefficient_extents(fg, spec.nb);
    CoeffTensor s(fe);
    std::array<int, kMaxDim> padv{0, 0, 0};
    for (int a = 0; a < fg.dim; ++a) padv[a] = pad;
    for (int i = 0; i < fe.n[0]; ++i)
        for (int j = 0; j < fe.n[1]; ++j)
            for (int k = 0; k < fe.n[2]; ++k)
                s(i, j, k) = coarse.evaluate(
                    {fg.coordinate(0, i - padv[0]), fg.coordinate(1, j - padv[1]), fg.coordinate(2, k - padv[2])});
    return direct_transform(s, BSplineBasis(spec.nb, fg.dim, fg.step)).data;
}

ProblemSolution solve_problem(const ProblemSpec& spec, const SolveConfig& config, double memory_budget) {
    config.validate();
    ProblemSolution out;
    const auto t0 = std::chrono::steady_clock::now();
    auto finish = [&](const Eigen::VectorXd& x, const InputFields& in, const NodeClassification& nodes) {
        out.solution = constant_field(spec.domain.grid(), spec.nb, 0.0);
        out.solution.coeffs.data = x;
        out.node_samples = sample_at_nodes(out.solution);
        out.nodes = nodes;
        out.clamped_d = in.clamped_d;
        out.clamped_mu = in.clamped_mu;
        if (in.clamped_d + in.clamped_mu > 0) {
            out.report.notes.push_back("clamped " + std::to_string(in.clamped_d) + " diffusion and " +
                                       std::to_string(in.clamped_mu) + " absorption coefficients to zero");
        }
    };

    if (config.method == SolveMethod::Direct) {
        const InputFields in = transform_inputs(spec);
        const SurfaceModel surface = realize_bc(spec);
        const FormData form{spec.domain, spec.nb, spec.param_degree(), in.d, in.mu, surface};
        const NodeClassification nodes = classify_nodes(spec.domain, spec.nb);
        const Eigen::VectorXd b = assemble_rhs(spec.domain, spec.nb, in.q, surface, nodes);
        out.assemble_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        Eigen::VectorXd x;
        out.report = direct_solve(form, b, x);
        finish(x, in, nodes);
        return out;
    }

    auto run = [&](auto tag) {
        using Scalar = decltype(tag);
        AssembledSystem<Scalar> sys = assemble_system<Scalar>(spec, memory_budget);
        out.assemble_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        typename SystemOperator<Scalar>::Vector x;
        std::vector<std::string> notes;
        int coarse_its = 0;
        if (config.coarse_factor >= 2) {
            x = coarse_initialize(spec, sys.inputs, config.coarse_factor, config, &coarse_its, &notes)
                    .template cast<Scalar>();
        }
        out.report = pcg(*sys.op, sys.rhs, x, config);
        out.report.coarse_iterations = coarse_its;
        out.report.notes.insert(out.report.notes.end(), notes.begin(), notes.end());
        finish(x.template cast<double>(), sys.inputs, sys.op->nodes());
    };
    if (spec.precision == Precision::Single) {
        run(float{});
    } else {
        run(double{});
    }
    return out;
}

}  // namespace tbs
