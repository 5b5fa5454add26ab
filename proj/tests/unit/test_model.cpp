#include <doctest/doctest.h>

#include <cmath>
#include <random>

#include "qdd/error.hpp"
#include "qdd/pressure.hpp"

using namespace qdd;

TEST_CASE("power law values") {
    const auto linear = pressure_eval(PressureLaw::power(1.0, 1.0), 2.0);
    CHECK(linear.p == 2.0);
    CHECK(linear.dp == 1.0);
    CHECK(linear.d2p == 0.0);

    const auto quad = pressure_eval(PressureLaw::power(2.0, 1.0), 3.0);
    CHECK(quad.p == doctest::Approx(9.0));
    CHECK(quad.dp == doctest::Approx(6.0));
    CHECK(quad.d2p == doctest::Approx(2.0));

    const PressureLaw law = PressureLaw::power(1.5, 2.0);
    const auto v = pressure_eval(law, 4.0);
    CHECK(v.p == doctest::Approx(16.0));
    CHECK(v.dp == doctest::Approx(6.0));
    CHECK(v.d2p == doctest::Approx(0.75));
    const double h = 1e-6;
    const double fd = (law.p(4.0 + h) - law.p(4.0 - h)) / (2.0 * h);
    CHECK(std::abs(fd - v.dp) <= 1e-6 * v.dp);
}

TEST_CASE("pressure rejects nonpositive density and bad parameters") {
    const auto law = PressureLaw::power(2.0);
    CHECK_THROWS_AS(law.eval(0.0), Error);
    CHECK_THROWS_AS(law.eval(-1.0), Error);
    CHECK_THROWS_AS(PressureLaw::power(0.5), Error);
    CHECK_THROWS_AS(PressureLaw::power(2.0, 0.0), Error);
}

TEST_CASE("derivatives agree with central differences on random samples") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> rho(0.01, 10.0);
    std::uniform_real_distribution<double> gamma(1.0, 3.0);
    for (int i = 0; i < 1000; ++i) {
        const auto law = PressureLaw::power(gamma(rng), 1.3);
        const double r = rho(rng);
        const double h = 1e-5 * r;
        const auto v = law.eval(r);
        const auto up = law.eval(r + h);
        const auto dn = law.eval(r - h);
        REQUIRE(std::abs((up.p - dn.p) / (2.0 * h) - v.dp) <= 1e-6 * std::abs(v.dp));
        REQUIRE(std::abs((up.dp - dn.dp) / (2.0 * h) - v.d2p) <= 1e-6 * std::max(std::abs(v.d2p), v.dp));
        REQUIRE(v.dp > 0.0);
    }
}

TEST_CASE("pressure is increasing") {
    const auto law = PressureLaw::power(2.5, 0.7);
    double prev = law.p(0.01);
    for (double r = 0.02; r < 10.0; r += 0.01) {
        const double p = law.p(r);
        REQUIRE(p > prev);
        prev = p;
    }
}

TEST_CASE("half_difference is odd and accurate") {
    const auto law = PressureLaw::power(2.0);
    for (double q : {1e-12, 1e-6, 0.01, 0.3}) {
        const auto plus = law.half_difference(1.0, q);
        const auto minus = law.half_difference(1.0, -q);
        CHECK(plus.p == -minus.p);
        CHECK(plus.dp == -minus.dp);
        // p = rho^2: (p(1+q) - p(1-q)) / 2 = 2q exactly, (p'(1+q) - p'(1-q)) / 2 = 2q.
        CHECK(plus.p == doctest::Approx(2.0 * q).epsilon(1e-14));
        CHECK(plus.dp == doctest::Approx(2.0 * q).epsilon(1e-14));
    }
}
