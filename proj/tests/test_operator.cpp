#include <random>

#include "dense_oracle.hpp"
#include "doctest.h"
#include "tbs/operator.hpp"

using namespace tbs;

namespace {

SplineField random_field(const Grid& g, int degree, std::mt19937& rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    SplineField f = constant_field(g, degree, 0.0);
    for (Index i = 0; i < f.coeffs.size(); ++i) f.coeffs.data[i] = u(rng);
    return f;
}

FormData random_form(const Domain& dom, int nb, int np, std::mt19937& rng) {
    SurfaceModel surf = SurfaceModel::uniform({0.8, 0.0});
    if (dom.is_box()) {
        surf.edge[0][0] = {1e2, 0.0};
        surf.edge[dom.grid().dim - 1][1] = {0.0, 0.0};
    }
    return FormData{dom, nb, np, random_field(dom.grid(), np, rng, 0.2, 2.0), random_field(dom.grid(), np, rng, 0.0, 1.0),
                    surf};
}

Domain random_mask(const Grid& g, std::mt19937& rng) {
    std::bernoulli_distribution keep(0.75);
    std::vector<std::uint8_t> occ(g.cell_extents().size());
    for (auto& o : occ) o = keep(rng);
    occ[0] = 1;
    return Domain::mask(g, occ);
}

double rel_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return (a - b).cwiseAbs().maxCoeff() / std::max(1e-300, b.cwiseAbs().maxCoeff());
}

}  // namespace

TEST_CASE("sparse operator equals dense oracle") {
    std::mt19937 rng(21);
    const Grid g2(2, {6, 5, 1}, {0.5, 0.3, 1.0});
    for (int nb : {1, 2, 3}) {
        for (const Domain& dom : {Domain::box(g2), random_mask(g2, rng)}) {
            const FormData form = random_form(dom, nb, nb == 2 ? 1 : nb, rng);
            const SparseOperator<double> op(form);
            const auto ref = oracle::assemble_dense(dom, nb, form.d, form.mu, nullptr, form.surface);
            Eigen::MatrixXd dense = Eigen::MatrixXd(op.matrix());
            // The oracle keeps dropped/inactive rows; compare on active entries only.
            for (Index i = 0; i < op.size(); ++i)
                for (Index j = 0; j < op.size(); ++j)
                    if (!op.nodes().is_active(i) || !op.nodes().is_active(j)) dense(i, j) = ref.A(i, j);
            CHECK((dense - ref.A).cwiseAbs().maxCoeff() < 1e-12 * ref.A.cwiseAbs().maxCoeff());
            CHECK((dense - dense.transpose()).cwiseAbs().maxCoeff() < 1e-12 * ref.A.cwiseAbs().maxCoeff());
        }
    }
}

TEST_CASE("three strategies agree") {
    std::mt19937 rng(33);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const std::vector<Grid> grids{Grid(1, {9, 1, 1}, {0.5, 1.0, 1.0}), Grid(2, {7, 9, 1}, {0.5, 0.25, 1.0}),
                                  Grid(3, {5, 6, 7}, {1.0, 0.5, 0.7})};
    for (const Grid& g : grids)
        for (int nb : {1, 2, 3})
            for (bool mask : {false, true}) {
                const Domain dom = mask ? random_mask(g, rng) : Domain::box(g);
                const FormData form = random_form(dom, nb, nb, rng);
                OnTheFlyOperator<double> otf(form, BlockShape{{3, 2, 4}});
                const BlockTensorOperator<double> blk(form);
                const SparseOperator<double> sp(form);
                Eigen::VectorXd c(otf.size());
                for (Index i = 0; i < c.size(); ++i) c[i] = u(rng);
                Eigen::VectorXd t1, t2, t3;
                otf.apply(c, t1);
                blk.apply(c, t2);
                sp.apply(c, t3);
                CHECK(rel_diff(t1, t3) < 1e-12);
                CHECK(rel_diff(t2, t3) < 1e-12);
                CHECK(rel_diff(otf.diagonal(), sp.diagonal()) < 1e-13);
                CHECK(rel_diff(blk.diagonal(), sp.diagonal()) < 1e-13);
                Eigen::VectorXd t4;
                otf.set_threads(3);
                otf.apply(c, t4);
                CHECK((t4.array() == t1.array()).all());
            }
}

TEST_CASE("operator examples") {
    const Grid g(1, {8, 1, 1}, {1.0, 1.0, 1.0});
    const Domain dom = Domain::box(g);
    FormData form{dom, 1, 0, constant_field(g, 0, 1.0), constant_field(g, 0, 0.0), SurfaceModel{}};
    const OnTheFlyOperator<double> op(form);
    Eigen::VectorXd c = Eigen::VectorXd::Constant(op.size(), 1.0), t;
    op.apply(c, t);
    CHECK(t.cwiseAbs().maxCoeff() < 1e-14);
    c.setZero();
    c[4] = 1.0;
    op.apply(c, t);
    CHECK(t[3] == doctest::Approx(-1.0));
    CHECK(t[4] == doctest::Approx(2.0));
    CHECK(t[5] == doctest::Approx(-1.0));
    CHECK(op.diagonal()[3] == doctest::Approx(2.0));

    FormData mass{dom, 1, 0, constant_field(g, 0, 0.0), constant_field(g, 0, 1.0), SurfaceModel{}};
    CHECK(OnTheFlyOperator<double>(mass).diagonal()[3] == doctest::Approx(2.0 / 3.0));

    // Pure Neumann stiffness: zero row sums on a mask too.
    const Grid g2(2, {6, 6, 1}, {1.0, 1.0, 1.0});
    std::vector<std::uint8_t> occ(25, 1);
    occ[12] = 0;
    const Domain m = Domain::mask(g2, occ);
    FormData neu{m, 3, 3, constant_field(g2, 3, 1.0), constant_field(g2, 3, 0.0), SurfaceModel{}};
    const SparseOperator<double> sp(neu);
    const Eigen::VectorXd rows = sp.matrix() * Eigen::VectorXd::Ones(sp.size());
    CHECK(rows.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("operator properties and errors") {
    std::mt19937 rng(77);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const Grid g(3, {6, 5, 6}, {0.5, 0.5, 0.5});
    const FormData form = random_form(random_mask(g, rng), 2, 2, rng);
    const OnTheFlyOperator<double> op(form);
    Eigen::VectorXd a(op.size()), b(op.size()), ta, tb, tab;
    for (Index i = 0; i < a.size(); ++i) {
        a[i] = u(rng);
        b[i] = u(rng);
    }
    op.apply(a, ta);
    op.apply(b, tb);
    op.apply(Eigen::VectorXd(2.5 * a + b), tab);
    CHECK(rel_diff(tab, 2.5 * ta + tb) < 1e-12);
    CHECK(std::abs(ta.dot(b) - tb.dot(a)) < 1e-10 * ta.norm() * b.norm());
    CHECK(ta.dot(a) > -1e-10);

    Tensor<double> wrong(Extents(3, {2, 2, 2}));
    CHECK_THROWS_AS((void)op.apply(wrong), Error);
    try {
        (void)BlockTensorOperator<double>(form, 1024.0);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Resource);
    }
    CHECK(BlockTensorOperator<double>::required_bytes(FormData{
              Domain::box(Grid(3, {240, 240, 240}, {1.0, 1.0, 1.0})), 3, 3,
              constant_field(Grid(3, {2, 2, 2}, {1.0, 1.0, 1.0}), 3, 1.0),
              constant_field(Grid(3, {2, 2, 2}, {1.0, 1.0, 1.0}), 3, 1.0), SurfaceModel{}}) > 16.0 * (1ull << 30));
}

TEST_CASE("single precision tracks double") {
    std::mt19937 rng(5);
    const Grid g(2, {12, 10, 1}, {0.1, 0.1, 1.0});
    const FormData form = random_form(Domain::box(g), 3, 3, rng);
    const OnTheFlyOperator<double> od(form);
    const OnTheFlyOperator<float> of(form);
    Eigen::VectorXd c = Eigen::VectorXd::Random(od.size()), td;
    Eigen::VectorXf tf;
    od.apply(c, td);
    of.apply(c.cast<float>(), tf);
    CHECK(rel_diff(tf.cast<double>(), td) < 1e-4);
    CHECK(of.stats().bytes_read * 2 == doctest::Approx(od.stats().bytes_read));
}
