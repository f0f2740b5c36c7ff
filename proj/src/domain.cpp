#include "tbs/domain.hpp"

#include <algorithm>

#include "tbs/bspline.hpp"
#include "tbs/kernels.hpp"

namespace tbs {

Grid::Grid(int d, std::array<int, kMaxDim> n, std::array<double, kMaxDim> h, std::array<double, kMaxDim> o)
    : dim(d), nodes(n), step(h), origin(o) {
    for (int a = d; a < kMaxDim; ++a) {
        nodes[a] = 1;
        step[a] = 1.0;
        origin[a] = 0.0;
    }
    validate();
}

void Grid::validate() const {
    if (dim < 1 || dim > kMaxDim) throw Error(ErrorKind::InputValidation, "grid dimension must be 1, 2 or 3");
    for (int a = 0; a < dim; ++a) {
        if (nodes[a] < 2) throw Error(ErrorKind::InputValidation, "grid needs at least 2 nodes per axis");
        if (!(step[a] > 0.0) || !std::isfinite(step[a])) {
            throw Error(ErrorKind::InputValidation, "grid step must be positive and finite");
        }
    }
}

Extents Grid::cell_extents() const {
    std::array<int, kMaxDim> c{1, 1, 1};
    for (int a = 0; a < dim; ++a) c[a] = nodes[a] - 1;
    return Extents(dim, c);
}

double Grid::volume() const {
    double v = 1.0;
    for (int a = 0; a < dim; ++a) v *= (nodes[a] - 1) * step[a];
    return v;
}

Domain::Domain(Grid grid, std::vector<std::uint8_t> occupancy, bool is_box)
    : grid_(std::move(grid)), cells_(grid_.cell_extents()), occupied_(std::move(occupancy)), is_box_(is_box) {
    if (static_cast<Index>(occupied_.size()) != cells_.size()) {
        throw Error(ErrorKind::ExtentMismatch, "mask has " + std::to_string(occupied_.size()) +
                                                   " cells, grid has " + std::to_string(cells_.size()));
    }
    for (auto& v : occupied_) v = v ? 1 : 0;
    occupied_count_ = std::count(occupied_.begin(), occupied_.end(), std::uint8_t{1});
    if (occupied_count_ == 0) throw Error(ErrorKind::EmptyDomain, "mask contains no occupied cell");
}

Domain Domain::box(const Grid& grid) {
    grid.validate();
    return Domain(grid, std::vector<std::uint8_t>(grid.cell_extents().size(), 1), true);
}

Domain Domain::mask(const Grid& grid, std::vector<std::uint8_t> occupancy) {
    grid.validate();
    return Domain(grid, std::move(occupancy), false);
}

Domain Domain::coarsen(int factor) const {
    if (factor < 2) throw Error(ErrorKind::Configuration, "coarsening factor must be at least 2");
    Grid coarse = grid_;
    std::array<int, kMaxDim> cc{1, 1, 1};
    for (int a = 0; a < grid_.dim; ++a) {
        cc[a] = (cells_.n[a] + factor - 1) / factor;
        coarse.nodes[a] = cc[a] + 1;
        coarse.step[a] = grid_.step[a] * factor;
    }
    const Extents ce(grid_.dim, cc);
    if (is_box_) return box(coarse);
    std::vector<std::uint8_t> occ(ce.size(), 0);
    for (int i = 0; i < cells_.n[0]; ++i) {
        for (int j = 0; j < cells_.n[1]; ++j) {
            for (int k = 0; k < cells_.n[2]; ++k) {
                if (!occupied(i, j, k)) continue;
                const int ci = grid_.dim > 0 ? i / factor : 0;
                const int cj = grid_.dim > 1 ? j / factor : 0;
                const int ck = grid_.dim > 2 ? k / factor : 0;
                occ[ce.index(ci, cj, ck)] = 1;
            }
        }
    }
    return mask(coarse, std::move(occ));
}

std::vector<CellClass> classify_cells(const Domain& domain, int nb, int np) {
    const Extents& e = domain.cells();
    const int dim = domain.grid().dim;
    const int r = std::max(1, (nb + np + 1) / 2);
    std::array<int, kMaxDim> rad{0, 0, 0};
    for (int a = 0; a < dim; ++a) rad[a] = r;
    std::vector<CellClass> out(e.size(), CellClass::Exterior);
    for (int i = 0; i < e.n[0]; ++i) {
        for (int j = 0; j < e.n[1]; ++j) {
            for (int k = 0; k < e.n[2]; ++k) {
                if (!domain.occupied(i, j, k)) continue;
                bool interior = true;
                for (int di = -rad[0]; di <= rad[0] && interior; ++di) {
                    for (int dj = -rad[1]; dj <= rad[1] && interior; ++dj) {
                        for (int dk = -rad[2]; dk <= rad[2]; ++dk) {
                            if (!domain.occupied(i + di, j + dj, k + dk)) {
                                interior = false;
                                break;
                            }
                        }
                    }
                }
                out[e.index(i, j, k)] = interior ? CellClass::Interior : CellClass::Boundary;
            }
        }
    }
    return out;
}

int coefficient_pad(int degree) {
    check_degree(degree);
    return degree / 2;
}

Extents coefficient_extents(const Grid& grid, int degree) {
    const int pad = coefficient_pad(degree);
    std::array<int, kMaxDim> n{1, 1, 1};
    for (int a = 0; a < grid.dim; ++a) n[a] = grid.nodes[a] + 2 * pad;
    return Extents(grid.dim, n);
}

NodeClassification classify_nodes(const Domain& domain, int nb, double drop_tolerance) {
    const Grid& g = domain.grid();
    NodeClassification nc;
    nc.pad = coefficient_pad(nb);
    nc.extents = coefficient_extents(g, nb);
    nc.classes.assign(nc.extents.size(), NodeClass::Inactive);
    const Extents& cells = domain.cells();

    // Integral over cell [0,1] of beta(x - b) for cell offsets b.
    const int lo = cell_offset_lo(nb);
    const int width = cell_offset_width(nb);
    std::vector<double> cell_integral(width, 0.0);
    const QuadratureRule rule = gauss_rule(nb / 2 + 2);
    for (int b = 0; b < width; ++b) {
        for (int half = 0; half < 2; ++half) {
            for (int q = 0; q < rule.size(); ++q) {
                cell_integral[b] += 0.5 * rule.weights[q] * eval_bspline(nb, 0.5 * (half + rule.nodes[q]) - (lo + b));
            }
        }
    }

    std::array<int, kMaxDim> pad{0, 0, 0};
    for (int a = 0; a < g.dim; ++a) pad[a] = nc.pad;

    for (int p0 = 0; p0 < nc.extents.n[0]; ++p0) {
        for (int p1 = 0; p1 < nc.extents.n[1]; ++p1) {
            for (int p2 = 0; p2 < nc.extents.n[2]; ++p2) {
                const std::array<long, kMaxDim> l{p0 - pad[0], p1 - pad[1], p2 - pad[2]};
                std::array<long, kMaxDim> c0{}, c1{};
                bool inside_grid = true;
                for (int a = 0; a < kMaxDim; ++a) {
                    if (a >= g.dim) {
                        c0[a] = c1[a] = 0;
                        continue;
                    }
                    const long lo_cell = l[a] - (lo + width - 1);
                    const long hi_cell = l[a] - lo;
                    c0[a] = std::max<long>(lo_cell, 0);
                    c1[a] = std::min<long>(hi_cell, cells.n[a] - 1);
                    if (lo_cell < 0 || hi_cell > cells.n[a] - 1) inside_grid = false;
                }
                bool any = false;
                bool all = true;
                double mass = 0.0;
                for (long i = c0[0]; i <= c1[0]; ++i) {
                    for (long j = c0[1]; j <= c1[1]; ++j) {
                        for (long k = c0[2]; k <= c1[2]; ++k) {
                            if (!domain.occupied(i, j, k)) {
                                all = false;
                                continue;
                            }
                            any = true;
                            double w = 1.0;
                            const std::array<long, kMaxDim> jc{i, j, k};
                            for (int a = 0; a < g.dim; ++a) w *= cell_integral[l[a] - jc[a] - lo];
                            mass += w;
                        }
                    }
                }
                NodeClass cls = NodeClass::Inactive;
                if (any && mass < drop_tolerance) {
                    ++nc.dropped;
                } else if (any) {
                    cls = !all ? NodeClass::Boundary : (inside_grid ? NodeClass::Interior : NodeClass::Truncated);
                }
                nc.classes[nc.extents.index(p0, p1, p2)] = cls;
                switch (cls) {
                    case NodeClass::Inactive: ++nc.inactive; break;
                    case NodeClass::Interior: ++nc.interior; break;
                    case NodeClass::Truncated: ++nc.truncated; break;
                    case NodeClass::Boundary: ++nc.boundary; break;
                }
            }
        }
    }
    return nc;
}

double SplineField::at(long i, long j, long k) const noexcept {
    const std::array<long, kMaxDim> l{i, j, k};
    std::array<int, kMaxDim> p{};
    for (int a = 0; a < kMaxDim; ++a) {
        const long q = a < grid.dim ? l[a] + pad : l[a];
        if (q < 0 || q >= coeffs.extents.n[a]) return 0.0;
        p[a] = static_cast<int>(q);
    }
    return coeffs(p[0], p[1], p[2]);
}

namespace {

template <typename WeightFn>
double gather(const SplineField& f, const std::array<double, kMaxDim>& x, WeightFn&& weights_for_axis) {
    std::array<std::array<double, kMaxDegree + 1>, kMaxDim> w{};
    std::array<int, kMaxDim> first{0, 0, 0};
    std::array<int, kMaxDim> count{1, 1, 1};
    for (int a = 0; a < kMaxDim; ++a) {
        if (a >= f.grid.dim) {
            w[a][0] = 1.0;
            continue;
        }
        const double u = (x[a] - f.grid.origin[a]) / f.grid.step[a];
        first[a] = weights_for_axis(a, u, std::span<double>(w[a]));
        count[a] = f.degree + 1;
    }
    double sum = 0.0;
    for (int i = 0; i < count[0]; ++i) {
        for (int j = 0; j < count[1]; ++j) {
            const double wij = w[0][i] * w[1][j];
            if (wij == 0.0) continue;
            for (int k = 0; k < count[2]; ++k) sum += wij * w[2][k] * f.at(first[0] + i, first[1] + j, first[2] + k);
        }
    }
    return sum;
}

}  // namespace

double SplineField::evaluate(const std::array<double, kMaxDim>& x) const {
    return gather(*this, x, [&](int, double u, std::span<double> w) { return bspline_weights(degree, u, w); });
}

std::array<double, kMaxDim> SplineField::gradient(const std::array<double, kMaxDim>& x) const {
    if (degree < 1) throw Error(ErrorKind::Smoothness, "gradient of a degree-0 spline");
    std::array<double, kMaxDim> g{0.0, 0.0, 0.0};
    for (int axis = 0; axis < grid.dim; ++axis) {
        g[axis] = gather(*this, x, [&](int a, double u, std::span<double> w) {
                      return a == axis ? bspline_derivative_weights(degree, u, 1, w) : bspline_weights(degree, u, w);
                  }) /
                  grid.step[axis];
    }
    return g;
}

SplineField constant_field(const Grid& grid, int degree, double value) {
    SplineField f;
    f.degree = degree;
    f.pad = coefficient_pad(degree);
    f.grid = grid;
    f.coeffs = CoeffTensor(coefficient_extents(grid, degree), value);
    return f;
}

SplineField pad_mirror(const CoeffTensor& node_coeffs, const Grid& grid, int degree) {
    if (!(node_coeffs.extents == grid.node_extents())) {
        throw Error(ErrorKind::ExtentMismatch, "node coefficients " + to_string(node_coeffs.extents) +
                                                   " do not match grid " + to_string(grid.node_extents()));
    }
    SplineField f = constant_field(grid, degree, 0.0);
    const Extents& e = f.coeffs.extents;
    std::array<int, kMaxDim> pad{0, 0, 0};
    for (int a = 0; a < grid.dim; ++a) pad[a] = f.pad;
    for (int i = 0; i < e.n[0]; ++i) {
        const int si = mirror_index(i - pad[0], grid.nodes[0]);
        for (int j = 0; j < e.n[1]; ++j) {
            const int sj = mirror_index(j - pad[1], grid.nodes[1]);
            for (int k = 0; k < e.n[2]; ++k) f.coeffs(i, j, k) = node_coeffs(si, sj, mirror_index(k - pad[2], grid.nodes[2]));
        }
    }
    return f;
}

CoeffTensor sample_at_nodes(const SplineField& field) {
    const std::vector<double> b = sampled_bspline(field.degree);
    const int m = static_cast<int>(b.size()) / 2;
    CoeffTensor cur = field.coeffs;
    for (int axis = 0; axis < field.grid.dim; ++axis) {
        Extents next_ext = cur.extents;
        next_ext.n[axis] = field.grid.nodes[axis];
        CoeffTensor next(next_ext);
        const Index in_stride = cur.extents.stride(axis);
        const Index out_stride = next_ext.stride(axis);
        const int in_len = cur.extents.n[axis];
        const int out_len = next_ext.n[axis];
        const Index lines = next_ext.size() / out_len;
        for (Index li = 0; li < lines; ++li) {
            const Index outer = li / out_stride;
            const Index inner = li % out_stride;
            const Index in_base = outer * in_stride * in_len + inner;
            const Index out_base = outer * out_stride * out_len + inner;
            for (int i = 0; i < out_len; ++i) {
                double s = 0.0;
                for (int t = -m; t <= m; ++t) s += b[t + m] * cur.data[in_base + (i - t + field.pad) * in_stride];
                next.data[out_base + i * out_stride] = s;
            }
        }
        cur = std::move(next);
    }
    return cur;
}

}  // namespace tbs
