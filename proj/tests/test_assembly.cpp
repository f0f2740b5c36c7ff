#include <random>

#include "dense_oracle.hpp"
#include "doctest.h"
#include "tbs/assembly.hpp"

using namespace tbs;

namespace {

SplineField random_field(const Grid& g, int degree, std::mt19937& rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    SplineField f = constant_field(g, degree, 0.0);
    for (Index i = 0; i < f.coeffs.size(); ++i) f.coeffs.data[i] = u(rng);
    return f;
}

oracle::DenseSystem gather(const Domain& dom, int nb, int np, int ns, const SplineField& d, const SplineField& mu,
                           const SplineField& q, const SurfaceModel& surface) {
    const ElementContext ctx = make_element_context(dom.grid(), nb, np, ns);
    oracle::DenseSystem s;
    s.pad = nb / 2;
    s.extents = coefficient_extents(dom.grid(), nb);
    s.A = Eigen::MatrixXd::Zero(s.extents.size(), s.extents.size());
    s.b = Eigen::VectorXd::Zero(s.extents.size());
    std::array<int, 3> pad{0, 0, 0};
    for (int a = 0; a < dom.grid().dim; ++a) pad[a] = s.pad;
    const Extents& ce = dom.cells();
    Eigen::MatrixXd E;
    Eigen::VectorXd v;
    for (int i = 0; i < ce.n[0]; ++i)
        for (int j = 0; j < ce.n[1]; ++j)
            for (int k = 0; k < ce.n[2]; ++k) {
                if (!dom.occupied(i, j, k)) continue;
                const std::array<int, 3> cell{i, j, k};
                element_matrix(ctx, d, mu, cell, E);
                element_vector(ctx, q, cell, v);
                for (const auto& f : boundary_faces(dom, surface, cell)) {
                    add_face_matrix(ctx, f.axis, f.side, f.coeffs.sigma, E);
                    add_face_vector(ctx, f.axis, f.side, f.coeffs.flux, v);
                }
                for (int r = 0; r < ctx.local_count(); ++r) {
                    const auto o = ctx.local_offsets(r);
                    const Index gr = s.extents.index(cell[0] + o[0] + pad[0], cell[1] + o[1] + pad[1], cell[2] + o[2] + pad[2]);
                    s.b[gr] += v[r];
                    for (int c = 0; c < ctx.local_count(); ++c) {
                        const auto oc = ctx.local_offsets(c);
                        const Index gc =
                            s.extents.index(cell[0] + oc[0] + pad[0], cell[1] + oc[1] + pad[1], cell[2] + oc[2] + pad[2]);
                        s.A(gr, gc) += E(r, c);
                    }
                }
            }
    return s;
}

void compare(const Domain& dom, int nb, int np, int ns, std::mt19937& rng) {
    const Grid& g = dom.grid();
    const SplineField d = random_field(g, np, rng, 0.5, 2.0);
    const SplineField mu = random_field(g, np, rng, 0.0, 1.0);
    const SplineField q = random_field(g, ns, rng, -1.0, 1.0);
    SurfaceModel surf = SurfaceModel::uniform({0.7, 1.3});
    surf.edge[0][0] = {2.0, -0.5};
    const auto got = gather(dom, nb, np, ns, d, mu, q, surf);
    const auto ref = oracle::assemble_dense(dom, nb, d, mu, &q, surf);
    const double scale = ref.A.cwiseAbs().maxCoeff();
    CHECK((got.A - ref.A).cwiseAbs().maxCoeff() < 1e-12 * scale);
    CHECK((got.b - ref.b).cwiseAbs().maxCoeff() < 1e-12 * ref.b.cwiseAbs().maxCoeff());
}

}  // namespace

TEST_CASE("element assembly matches dense oracle: 1-D") {
    std::mt19937 rng(3);
    const Grid g(1, {6, 1, 1}, {0.4, 1.0, 1.0}, {-1.0, 0.0, 0.0});
    for (int nb : {1, 2, 3})
        for (int np : {0, 1, 3}) compare(Domain::box(g), nb, np, nb, rng);
}

TEST_CASE("element assembly matches dense oracle: 2-D L-shape") {
    std::mt19937 rng(5);
    const Grid g(2, {6, 5, 1}, {0.5, 0.3, 1.0});
    std::vector<std::uint8_t> occ(g.cell_extents().size(), 1);
    for (int i = 3; i < 5; ++i)
        for (int j = 2; j < 4; ++j) occ[g.cell_extents().index(i, j, 0)] = 0;
    const Domain dom = Domain::mask(g, occ);
    for (int nb : {1, 2, 3}) compare(dom, nb, nb, 1, rng);
}

TEST_CASE("element assembly matches dense oracle: 3-D box") {
    std::mt19937 rng(9);
    const Grid g(3, {4, 3, 4}, {0.5, 1.0, 0.25});
    compare(Domain::box(g), 2, 1, 2, rng);
    compare(Domain::box(g), 1, 0, 1, rng);
}

TEST_CASE("boundary cell quadrature") {
    const Grid g(2, {6, 6, 1}, {1.0, 1.0, 1.0});
    const Domain dom = Domain::box(g);
    const auto classes = classify_cells(dom, 1, 1);
    const ElementContext ctx = make_element_context(g, 1, 1, 1);
    const SplineField one = constant_field(g, 1, 1.0);
    const SurfaceModel none{};
    CHECK_THROWS_AS(boundary_cell_quadrature(dom, classes, ctx, none, one, one, {2, 2, 0}), Error);
    Eigen::MatrixXd interior;
    element_matrix(ctx, one, one, {2, 2, 0}, interior);
    const Eigen::MatrixXd edge = boundary_cell_quadrature(dom, classes, ctx, none, one, one, {0, 2, 0});
    CHECK((edge - interior).cwiseAbs().maxCoeff() < 1e-14);
}
