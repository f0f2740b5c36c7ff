#include <cmath>

#include "doctest.h"
#include "oracle.hpp"
#include "tbs/kernels.hpp"

using namespace tbs;

namespace {

double tri_oracle(int nb, int np, int da, int db, int dk, int dm, double a = -12.0, double b = 12.0) {
    return oracle::integrate(
        [&](double x) {
            return oracle::bspline_derivative(nb, x - dk, da) * oracle::bspline_derivative(nb, x, db) *
                   oracle::bspline(np, x - dm);
        },
        a, b, 12);
}

double bi_oracle(int n1, int n2, int da, int db, int j) {
    return oracle::integrate(
        [&](double x) { return oracle::bspline_derivative(n1, x - j, da) * oracle::bspline_derivative(n2, x, db); },
        -12.0, 12.0, 12);
}

}  // namespace

TEST_CASE("gauss rule") {
    const QuadratureRule r1 = gauss_rule(1);
    CHECK(r1.nodes[0] == doctest::Approx(0.5));
    CHECK(r1.weights[0] == doctest::Approx(1.0));
    const QuadratureRule r2 = gauss_rule(2);
    CHECK(r2.nodes[0] == doctest::Approx(0.5 - 0.5 / std::sqrt(3.0)).epsilon(1e-15));
    for (int count = 1; count <= 16; ++count) {
        const QuadratureRule r = gauss_rule(count);
        const oracle::Rule o = oracle::gauss(count);
        double wsum = 0.0;
        for (int q = 0; q < count; ++q) {
            wsum += r.weights[q];
            CHECK(r.nodes[q] == doctest::Approx(o.x[q]).epsilon(1e-13));
            CHECK(r.weights[q] == doctest::Approx(o.w[q]).epsilon(1e-12));
        }
        CHECK(std::abs(wsum - 1.0) < 1e-14);
        double x5 = 0.0;
        for (int q = 0; q < count; ++q) x5 += r.weights[q] * std::pow(r.nodes[q], 2 * count - 1);
        CHECK(x5 == doctest::Approx(1.0 / (2 * count)).epsilon(1e-13));
    }
    CHECK_THROWS_AS(gauss_rule(0), Error);
    CHECK_THROWS_AS(gauss_rule(17), Error);
}

TEST_CASE("trilinear kernels match quadrature oracle") {
    for (int nb : {1, 2, 3}) {
        for (int np : {0, 1, 3}) {
            for (int d = 0; d <= 1; ++d) {
                const auto t = trilinear_kernel(nb, np, d, d);
                for (int dk = -t.k_radius; dk <= t.k_radius; ++dk) {
                    for (int dm = -t.m_radius; dm <= t.m_radius; ++dm) {
                        CHECK(std::abs(t(dk, dm) - tri_oracle(nb, np, d, d, dk, dm)) < 1e-12);
                    }
                }
            }
            // Mixed derivative placement, checked against the swap symmetry.
            const auto t10 = trilinear_kernel(nb, np, 1, 0);
            const auto t01 = trilinear_kernel(nb, np, 0, 1);
            for (int dk = -nb; dk <= nb; ++dk) {
                for (int dm = -t10.m_radius; dm <= t10.m_radius; ++dm) {
                    CHECK(std::abs(t10(dk, dm) - tri_oracle(nb, np, 1, 0, dk, dm)) < 1e-12);
                    const int dm2 = dm - dk;
                    if (std::abs(dm2) <= t01.m_radius) CHECK(std::abs(t10(dk, dm) - t01(-dk, dm2)) < 1e-13);
                }
            }
        }
    }
}

TEST_CASE("trilinear examples and partition-of-unity collapse") {
    const auto w = trilinear_kernel(1, 0, 1, 1);
    double s0 = 0.0, s1 = 0.0;
    for (int dm = -w.m_radius; dm <= w.m_radius; ++dm) {
        s0 += w(0, dm);
        s1 += w(1, dm);
    }
    CHECK(s0 == doctest::Approx(2.0).epsilon(1e-13));
    CHECK(s1 == doctest::Approx(-1.0).epsilon(1e-13));
    CHECK(trilinear_kernel(1, 1, 0, 0)(0, 0) == doctest::Approx(0.5).epsilon(1e-14));

    for (int nb = 0; nb <= 5; ++nb) {
        for (int np = 0; np <= 5; ++np) {
            for (int d = 0; d <= (nb > 0 ? 1 : 0); ++d) {
                const auto t = trilinear_kernel(nb, np, d, d);
                const auto b = bilinear_kernel(nb, nb, d, d);
                for (int dk = -nb; dk <= nb; ++dk) {
                    double s = 0.0;
                    for (int dm = -t.m_radius; dm <= t.m_radius; ++dm) s += t(dk, dm);
                    CHECK(std::abs(s - b(dk)) < 1e-12);
                }
            }
        }
    }
    CHECK_THROWS_AS(trilinear_kernel(0, 1, 1, 1), Error);
}

TEST_CASE("bilinear kernels: scalar product and integration by parts") {
    CHECK(bilinear_kernel(3, 3, 0, 0)(0) == doctest::Approx(oracle::bspline(7, 0.0)).epsilon(1e-13));
    CHECK(bilinear_kernel(0, 0, 0, 0)(0) == doctest::Approx(1.0));
    const auto s = bilinear_kernel(1, 1, 1, 1);
    CHECK(s(-1) == doctest::Approx(-1.0));
    CHECK(s(0) == doctest::Approx(2.0));
    CHECK(s(1) == doctest::Approx(-1.0));
    for (int n1 = 0; n1 <= 5; ++n1) {
        for (int n2 = 0; n2 <= 5; ++n2) {
            const auto b = bilinear_kernel(n1, n2, 0, 0);
            for (int j = -b.radius; j <= b.radius; ++j) {
                // eval_bspline stops at degree 5; higher sums use the closed form.
                const int n = n1 + n2 + 1;
                CHECK(std::abs(b(j) - (n <= 5 ? eval_bspline(n, j) : oracle::bspline(n, j))) < 1e-12);
                CHECK(std::abs(b(j) - bi_oracle(n1, n2, 0, 0, j)) < 1e-12);
            }
        }
    }
    for (int n : {1, 2, 3}) {
        const auto b = bilinear_kernel(n, n, 1, 1);
        for (int j = -n; j <= n; ++j) {
            const double ref = -(eval_bspline(2 * n - 1, j + 1) - 2 * eval_bspline(2 * n - 1, j) +
                                 eval_bspline(2 * n - 1, j - 1));
            CHECK(std::abs(b(j) - ref) < 1e-12);
        }
    }
}

TEST_CASE("truncated kernels match oracle on a bounded interval") {
    const int nodes = 7;
    for (int nb : {1, 2, 3}) {
        for (int np : {0, 1, 3}) {
            const auto cell = cell_trilinear(nb, np, 1, 1);
            for (long l = -(nb / 2); l <= nodes - 1 + nb / 2; ++l) {
                const auto t = trilinear_kernel_truncated(cell, l, CellRange{0, nodes - 2});
                for (int dk = -nb; dk <= nb; ++dk) {
                    for (int dm = -t.m_radius; dm <= t.m_radius; ++dm) {
                        const double ref = tri_oracle(nb, np, 1, 1, dk, dm, -double(l), nodes - 1.0 - l);
                        CHECK(std::abs(t(dk, dm) - ref) < 1e-12);
                    }
                }
            }
        }
    }
}

TEST_CASE("separable composition") {
    const auto f = trilinear_kernel(1, 0, 0, 0);
    const auto w = trilinear_kernel(1, 0, 1, 1);
    const auto s1 = compose_separable(f, w, {0.5, 1.0, 1.0}, 1);
    REQUIRE(s1.stiffness_terms().size() == 1);
    CHECK(s1.stiffness_scale[0] == doctest::Approx(2.0));

    const auto s2 = compose_separable(f, w, {1.0, 1.0, 1.0}, 2);
    const auto st2 = materialize_stencil(s2, 1.0, 0.0);
    CHECK(std::abs(st2.data.sum()) < 1e-13);

    // 3-D stencil against a dense tensor-product quadrature of grad.grad.
    const auto s3 = compose_separable(f, w, {1.0, 1.0, 1.0}, 3);
    const auto st3 = materialize_stencil(s3, 1.0, 0.0);
    for (int i = -1; i <= 1; ++i) {
        for (int j = -1; j <= 1; ++j) {
            for (int k = -1; k <= 1; ++k) {
                const std::array<int, 3> o{i, j, k};
                double ref = 0.0;
                for (int a = 0; a < 3; ++a) {
                    double p = 1.0;
                    for (int b = 0; b < 3; ++b) p *= bi_oracle(1, 1, a == b, a == b, o[b]);
                    ref += p;
                }
                CHECK(std::abs(st3(i + 1, j + 1, k + 1) - ref) < 1e-12);
            }
        }
    }
    CHECK_THROWS_AS(compose_separable(w, f, {1.0, 1.0, 1.0}, 2), Error);
}

TEST_CASE("boundary face kernel") {
    const auto k1 = boundary_face_kernel(BSplineBasis(1, 1, {1.0, 1.0, 1.0}), Face{{1, 0, 0}, 0.0});
    CHECK(k1.normal(0, 0) == doctest::Approx(1.0));
    CHECK(k1.normal(1, 0) == 0.0);
    const auto k3 = boundary_face_kernel(BSplineBasis(3, 1, {1.0, 1.0, 1.0}), Face{{-1, 0, 0}, 0.0});
    CHECK(k3.normal(-1, -1) == doctest::Approx(1.0 / 36.0));
    CHECK(k3.normal(0, 1) == doctest::Approx(2.0 / 3.0 / 6.0));
    CHECK(k3.normal(0, 0) == doctest::Approx(4.0 / 9.0));
    const auto k2 = boundary_face_kernel(BSplineBasis(1, 2, {1.0, 1.0, 1.0}), Face{{0, 1, 0}, 0.0});
    CHECK(k2.axis == 1);
    CHECK(k2.tangential(0) == doctest::Approx(2.0 / 3.0));
    CHECK(k2.tangential(1) == doctest::Approx(1.0 / 6.0));
    try {
        (void)boundary_face_kernel(BSplineBasis(1, 2, {1.0, 1.0, 1.0}), Face{{0.6, 0.8, 0}, 0.0});
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::UnsupportedGeometry);
    }
}
