#include <catch_amalgamated.hpp>

#include <cmath>

#include "invopt/rootfinding.hpp"
#include "support.hpp"

using namespace invopt;
using Catch::Approx;
using testing_support::Gen;

TEST_CASE("cardano root on small cubics") {
    CHECK(cardano_unique_real_root({0.0, 0.0}) == 0.0);
    CHECK(cardano_unique_real_root({1.0, -2.0}) == Approx(1.0).epsilon(1e-15));
    CHECK(cardano_unique_real_root({0.0, 8.0}) == Approx(-2.0).epsilon(1e-15));
}

TEST_CASE("cardano root of v^3+3v+3 matches bisection") {
    const double v = cardano_unique_real_root({3.0, 3.0});
    const double oracle = testing_support::cubic_root_oracle(3.0, 3.0);
    CHECK(v == Approx(oracle).epsilon(1e-14));
    CHECK(v == Approx(-0.8177316738868235).epsilon(1e-15));
    CHECK(std::abs(v - (-0.81770)) < 1e-4);
}

TEST_CASE("discriminant values") {
    CHECK(discriminant_of({0.0, 0.0}).delta == 0.0);
    CHECK(discriminant_of({1.0, -2.0}).delta == 112.0);
    CHECK(discriminant_of({-3.0, 2.0}).delta == 0.0);
}

TEST_CASE("double-root boundary returns the simple root") {
    // (v-1)^2 (v+2)
    CHECK(cardano_unique_real_root({-3.0, 2.0}) == Approx(-2.0).epsilon(1e-14));
}

TEST_CASE("three real roots are rejected") {
    try {
        cardano_unique_real_root({-3.0, 1.0});
        FAIL("expected NonUniqueRealRoot");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NonUniqueRealRoot);
    }
}

TEST_CASE("random cubics with positive discriminant: scaled residual and oracle agreement") {
    Gen g(0xC0B1C);
    int checked = 0;
    for (int i = 0; i < 100000; ++i) {
        const double p = g.signed_magnitude(-8, 8);
        const double q = g.signed_magnitude(-8, 8);
        if (discriminant_of({p, q}).delta <= 0.0) continue;
        ++checked;
        const double v = cardano_unique_real_root({p, q});
        const double scale = std::max({1.0, std::pow(std::abs(p), 1.5), std::abs(q)});
        const double res = std::abs((v * v + p) * v + q);
        if (res > 1e-9 * scale) FAIL("residual " << res << " at p=" << p << " q=" << q);
        if (i % 100 == 0) {
            const double o = testing_support::cubic_root_oracle(p, q);
            if (std::abs(v - o) > 1e-9 * std::max(1.0, std::abs(o)))
                FAIL("oracle mismatch p=" << p << " q=" << q << " v=" << v << " oracle=" << o);
        }
    }
    CHECK(checked > 50000);
}

TEST_CASE("cardano root is odd in q") {
    Gen g(7);
    for (int i = 0; i < 10000; ++i) {
        const double p = g.signed_magnitude(-4, 4);
        const double q = g.signed_magnitude(-4, 4);
        if (discriminant_of({p, q}).delta <= 0.0) continue;
        REQUIRE(cardano_unique_real_root({p, -q}) == -cardano_unique_real_root({p, q}));
    }
}

TEST_CASE("quadratic roots on factorable cases") {
    auto r = stable_quadratic_roots(3.0, 4.0);
    CHECK(r.plus == 4.0);
    CHECK(r.minus == -1.0);
    r = stable_quadratic_roots(-3.0, 4.0);
    CHECK(r.plus == 1.0);
    CHECK(r.minus == -4.0);
    r = stable_quadratic_roots(0.0, 0.0);
    CHECK(r.plus == 0.0);
    CHECK(r.minus == 0.0);
}

TEST_CASE("quadratic roots: cancellation stress") {
    const auto r = stable_quadratic_roots(1e8, 1.0);
    // exact minus root: -2/(1e8 + sqrt(1e16 + 4))
    CHECK(r.minus == Approx(-1e-8).epsilon(1e-15));
    CHECK(r.plus == 1e8);
    const auto s = stable_quadratic_roots(-1e8, 1.0);
    CHECK(s.plus == Approx(1e-8).epsilon(1e-15));
    CHECK(s.minus == -1e8);
}

TEST_CASE("random quadratics: scaled residual and sum/product") {
    Gen g(0x9AD);
    for (int i = 0; i < 100000; ++i) {
        const double beta = g.coin(0.05) ? 0.0 : g.signed_magnitude(-8, 8);
        const double c = g.coin(0.05) ? 0.0 : g.magnitude(-8, 8);
        const auto r = stable_quadratic_roots(beta, c);
        for (double v : {r.plus, r.minus}) {
            const double scale = std::max({v * v, std::abs(beta * v), c});
            const double res = std::abs(v * v - beta * v - c);
            if (res > 1e-12 * scale && scale > 0)
                FAIL("residual " << res / scale << " at beta=" << beta << " c=" << c);
        }
        REQUIRE(r.plus >= 0.0);
        REQUIRE(r.minus <= 0.0);
        REQUIRE(std::abs(r.plus + r.minus - beta) <= 1e-12 * std::max(std::abs(r.plus), std::abs(r.minus)));
    }
}

TEST_CASE("negative constant term is rejected") {
    try {
        stable_quadratic_roots(1.0, -1e-300);
        FAIL("expected NegativeTheta");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NegativeTheta);
    }
}
