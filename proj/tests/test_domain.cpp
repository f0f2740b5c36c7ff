#include "doctest.h"
#include "tbs/domain.hpp"

using namespace tbs;

TEST_CASE("grid validation") {
    CHECK_THROWS_AS(Grid(2, {1, 4, 1}, {1.0, 1.0, 1.0}), Error);
    CHECK_THROWS_AS(Grid(2, {4, 4, 1}, {1.0, -1.0, 1.0}), Error);
    const Grid g(2, {5, 3, 9}, {0.5, 2.0, 7.0});
    CHECK(g.nodes[2] == 1);
    CHECK(g.cell_extents().n == std::array<int, 3>{4, 2, 1});
    CHECK(g.volume() == doctest::Approx(8.0));
}

TEST_CASE("cell classification") {
    const Grid g(2, {7, 6, 1}, {1.0, 1.0, 1.0});
    const auto cls = classify_cells(Domain::box(g), 1, 1);
    const Extents e = g.cell_extents();
    for (int i = 0; i < e.n[0]; ++i) {
        for (int j = 0; j < e.n[1]; ++j) {
            const bool ring = i == 0 || j == 0 || i == e.n[0] - 1 || j == e.n[1] - 1;
            CHECK(cls[e.index(i, j, 0)] == (ring ? CellClass::Boundary : CellClass::Interior));
        }
    }
    const Grid g1(1, {5, 1, 1}, {1.0, 1.0, 1.0});
    const auto c1 = classify_cells(Domain::mask(g1, {1, 1, 1, 0}));
    CHECK(c1[2] == CellClass::Boundary);
    CHECK(c1[3] == CellClass::Exterior);
    CHECK(classify_cells(Domain::mask(g1, {1, 1, 1, 0})) == c1);
    try {
        (void)Domain::mask(g1, {0, 0, 0, 0});
        FAIL("expected throw");
    } catch (const Error& err) {
        CHECK(err.kind() == ErrorKind::EmptyDomain);
    }
    CHECK_THROWS_AS(Domain::mask(g1, {1, 1}), Error);
}

TEST_CASE("node classification") {
    const Grid g(1, {9, 1, 1}, {1.0, 1.0, 1.0});
    const auto box = classify_nodes(Domain::box(g), 3);
    CHECK(box.extents.n[0] == 11);
    CHECK(box.interior == 5);  // l = 2..6
    CHECK(box.truncated == 6);
    CHECK(box.boundary == 0);

    const auto m = classify_nodes(Domain::mask(g, {0, 1, 1, 1, 1, 1, 1, 0}), 1);
    // Hats at nodes 1..7 touch occupied cells; only nodes 1 and 7 have cut supports.
    CHECK(m.inactive == 2);
    CHECK(m.boundary == 2);
    CHECK(m.interior == 5);
}

TEST_CASE("coarsening pads and keeps any-occupied cells") {
    const Grid g(2, {10, 9, 1}, {0.5, 0.5, 1.0});
    std::vector<std::uint8_t> occ(g.cell_extents().size(), 0);
    occ[g.cell_extents().index(8, 7, 0)] = 1;
    const Domain c = Domain::mask(g, occ).coarsen(4);
    CHECK(c.grid().nodes == std::array<int, 3>{4, 3, 1});
    CHECK(c.grid().step[0] == 2.0);
    CHECK(c.occupied_count() == 1);
    CHECK(c.occupied(2, 1, 0));
    CHECK(Domain::box(g).coarsen(2).is_box());
}

TEST_CASE("spline field evaluation") {
    const Grid g(2, {6, 5, 1}, {0.5, 0.25, 1.0}, {1.0, -1.0, 0.0});
    const SplineField f = constant_field(g, 3, 2.5);
    CHECK(f.evaluate({1.7, -0.6, 0.0}) == doctest::Approx(2.5));
    const auto grad = f.gradient({1.7, -0.6, 0.0});
    CHECK(std::abs(grad[0]) < 1e-13);
    CHECK(std::abs(grad[1]) < 1e-13);

    // Linear function is reproduced by mirrored-free linear coefficients for n = 1.
    CoeffTensor lin(g.node_extents());
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 5; ++j) lin(i, j) = 2.0 * g.coordinate(0, i) - g.coordinate(1, j);
    const SplineField fl = pad_mirror(lin, g, 1);
    CHECK(fl.evaluate({1.7, -0.6, 0.0}) == doctest::Approx(2.0 * 1.7 + 0.6));
    const auto gl = fl.gradient({1.7, -0.6, 0.0});
    CHECK(gl[0] == doctest::Approx(2.0));
    CHECK(gl[1] == doctest::Approx(-1.0));
}
