#include <doctest/doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "qdd/banded.hpp"
#include "qdd/grid.hpp"

using namespace qdd;

namespace {

double interior_max_error(const ScalarField& approx, const ScalarField& exact, Index skip) {
    double e = 0.0;
    for (Index j = skip; j < approx.size() - skip; ++j) e = std::max(e, std::abs(approx[j] - exact[j]));
    return e;
}

BandedMatrix<double> random_banded(std::mt19937_64& rng, Index n, Index kl, Index ku) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    BandedMatrix<double> a(n, kl, ku);
    for (Index i = 0; i < n; ++i)
        for (Index j = std::max<Index>(0, i - kl); j <= std::min<Index>(n - 1, i + ku); ++j) a.ref(i, j) = u(rng);
    // Keep the draws well conditioned: a random band plus a diagonal shift.
    for (Index i = 0; i < n; ++i) a.ref(i, i) += (u(rng) > 0 ? 1.0 : -1.0) * static_cast<double>(kl + ku + 1);
    return a;
}

}  // namespace

TEST_CASE("make_grid validates and spaces nodes") {
    CHECK_THROWS_AS(make_grid(1.0, 5), Error);
    CHECK_THROWS_AS(make_grid(0.0, 11), Error);
    CHECK_THROWS_AS(make_grid(-1.0, 11), Error);

    const auto g = make_grid(2.0, 9);
    CHECK(g.spacing() == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(g.x(0) == -2.0);
    CHECK(g.x(8) == doctest::Approx(2.0).epsilon(1e-15));

    const auto big = make_grid(100.0, 4001);
    CHECK(big.spacing() == doctest::Approx(0.05).epsilon(1e-14));
    for (Index j = 1; j < big.size(); ++j) REQUIRE(big.x(j) > big.x(j - 1));
    CHECK(std::abs(big.x(2000)) < 1e-12);
}

TEST_CASE("diff of constants and quadratics") {
    const auto g = make_grid(3.0, 61);
    const auto c = ScalarField::sample(g, [](double) { return 3.0; });
    for (int k = 1; k <= 4; ++k) CHECK(diff(c, k).values().cwiseAbs().maxCoeff() == 0.0);

    const auto q = ScalarField::sample(g, [](double x) { return x * x; });
    const auto d2 = diff(q, 2);
    for (Index j = 1; j < g.size() - 1; ++j) REQUIRE(d2[j] == doctest::Approx(2.0).epsilon(1e-10));
    const auto d1 = diff(q, 1);
    for (Index j = 1; j < g.size() - 1; ++j) REQUIRE(d1[j] == doctest::Approx(2.0 * g.x(j)).epsilon(1e-12));

    CHECK_THROWS_AS(diff(q, 0), Error);
    CHECK_THROWS_AS(diff(q, 5), Error);
}

TEST_CASE("diff is linear") {
    const auto g = make_grid(4.0, 81);
    const auto u = ScalarField::sample(g, [](double x) { return std::exp(-x * x); });
    const auto v = ScalarField::sample(g, [](double x) { return std::sin(x) + 0.3 * x; });
    const double a = 1.7, b = -0.4;
    for (int k = 1; k <= 4; ++k) {
        const auto lhs = diff(a * u + b * v, k);
        const auto rhs = a * diff(u, k) + b * diff(v, k);
        const double scale = 1.0 + rhs.values().cwiseAbs().maxCoeff();
        CHECK((lhs.values() - rhs.values()).cwiseAbs().maxCoeff() <= 1e-12 * scale);
    }
}

TEST_CASE("fourth derivative of sin converges at second order") {
    const double pi = std::numbers::pi;
    double errors[3];
    Index n = 101;
    for (double& e : errors) {
        const auto g = make_grid(pi, n);
        const auto s = ScalarField::sample(g, [](double x) { return std::sin(x); });
        // Skip nodes whose stencil reaches the ghosts.
        e = interior_max_error(diff(s, 4), s, 2);
        n = 2 * n - 1;
    }
    CHECK(errors[0] / errors[1] == doctest::Approx(4.0).epsilon(0.05));
    CHECK(errors[1] / errors[2] == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("refinement order of every derivative on a Gaussian") {
    for (int k = 1; k <= 4; ++k) {
        double prev = 0.0;
        Index n = 201;
        for (int level = 0; level < 3; ++level) {
            const auto g = make_grid(8.0, n);
            const auto f = ScalarField::sample(g, [](double x) { return std::exp(-x * x); });
            const auto exact = ScalarField::sample(g, [k](double x) {
                const double e = std::exp(-x * x);
                switch (k) {
                    case 1: return -2.0 * x * e;
                    case 2: return (4.0 * x * x - 2.0) * e;
                    case 3: return (-8.0 * x * x * x + 12.0 * x) * e;
                    default: return (16.0 * x * x * x * x - 48.0 * x * x + 12.0) * e;
                }
            });
            const double err = interior_max_error(diff(f, k), exact, 0);
            if (level > 0) CHECK(std::log2(prev / err) >= 1.9);
            prev = err;
            n = 2 * n - 1;
        }
    }
}

TEST_CASE("band_solve small systems") {
    auto id = BandedMatrix<double>::identity(3, 1, 1);
    Eigen::VectorXd b(3);
    b << 1, 2, 3;
    CHECK((band_solve(id, b) - b).norm() == 0.0);

    BandedMatrix<double> d(2, 0, 0);
    d.ref(0, 0) = 2.0;
    d.ref(1, 1) = 2.0;
    Eigen::VectorXd r(2);
    r << 4, 6;
    const auto x = band_solve(d, r);
    CHECK(x[0] == 2.0);
    CHECK(x[1] == 3.0);

    CHECK_THROWS_AS(d.ref(0, 1) = 1.0, Error);
}

TEST_CASE("band_solve rejects singular matrices") {
    BandedMatrix<double> a(3, 1, 1);
    a.ref(0, 0) = 1.0;
    a.ref(0, 1) = 2.0;
    a.ref(1, 0) = 2.0;
    a.ref(1, 1) = 4.0;
    a.ref(2, 2) = 1.0;
    try {
        (void)band_solve(a, Eigen::VectorXd(Eigen::VectorXd::Ones(3)));
        FAIL("expected singular-matrix");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::singular_matrix);
    }
}

TEST_CASE("band_solve matches a dense oracle") {
    std::mt19937_64 rng(20240611);
    std::uniform_int_distribution<int> size(1, 64);
    std::uniform_int_distribution<int> width(0, 3);
    std::normal_distribution<double> normal;

    {
        const Index n = 50;
        const auto a = random_banded(rng, n, 1, 1);
        Eigen::VectorXd b(n);
        for (auto& v : b) v = normal(rng);
        const Eigen::VectorXd dense = a.to_dense().partialPivLu().solve(b);
        CHECK((band_solve(a, b) - dense).lpNorm<Eigen::Infinity>() <= 1e-10 * dense.lpNorm<Eigen::Infinity>());
    }

    for (int trial = 0; trial < 100; ++trial) {
        const Index n = size(rng);
        const Index kl = width(rng), ku = width(rng);
        const auto a = random_banded(rng, n, kl, ku);
        Eigen::VectorXd b(n);
        for (auto& v : b) v = normal(rng);
        const Eigen::VectorXd x = band_solve(a, b);
        const Eigen::VectorXd dense = a.to_dense().partialPivLu().solve(b);
        REQUIRE((x - dense).lpNorm<Eigen::Infinity>() <= 1e-10 * dense.lpNorm<Eigen::Infinity>());
        REQUIRE(((a * x) - b).lpNorm<Eigen::Infinity>() <= 1e-10 * b.lpNorm<Eigen::Infinity>());
    }
}

TEST_CASE("trapezoid integration") {
    const auto g = make_grid(2.0, 41);
    CHECK(integrate(ScalarField::sample(g, [](double) { return 1.0; })) == doctest::Approx(4.0).epsilon(1e-14));
    const auto odd = ScalarField::sample(g, [](double x) { return x; });
    CHECK(std::abs(integrate(odd)) <= 1e-12 * 2.0 * 2.0);

    const auto wide = make_grid(10.0, 4001);
    const double gauss = integrate(ScalarField::sample(wide, [](double x) { return std::exp(-x * x); }));
    CHECK(std::abs(gauss - std::sqrt(std::numbers::pi)) <= 1e-8);

    const auto cubic = ScalarField::sample(wide, [](double x) { return x * x * x - 4.0 * x; });
    CHECK(std::abs(integrate(cubic)) <= 1e-12 * cubic.values().cwiseAbs().maxCoeff() * 10.0);
}

TEST_CASE("cumulative integral") {
    const auto g = make_grid(2.0, 9);
    const auto zero = cumulative_integral(ScalarField(g));
    CHECK(zero.values().cwiseAbs().maxCoeff() == 0.0);
    const auto ramp = cumulative_integral(ScalarField::sample(g, [](double) { return 1.0; }));
    for (Index j = 0; j < g.size(); ++j) CHECK(ramp[j] == doctest::Approx(0.5 * static_cast<double>(j)));

    // g(x) = exp(-x^2) - exp(-L^2) vanishes at -L; its derivative integrates back to it.
    double prev = 0.0;
    Index n = 201;
    for (int level = 0; level < 3; ++level) {
        const auto grid = make_grid(5.0, n);
        const double tail = std::exp(-25.0);
        const auto dg = ScalarField::sample(grid, [](double x) { return -2.0 * x * std::exp(-x * x); });
        const auto exact = ScalarField::sample(grid, [tail](double x) { return std::exp(-x * x) - tail; });
        const double err = interior_max_error(cumulative_integral(dg), exact, 0);
        if (level > 0) CHECK(prev / err == doctest::Approx(4.0).epsilon(0.05));
        prev = err;
        n = 2 * n - 1;
    }
}

TEST_CASE("cumulative integral then diff recovers the field") {
    const auto g = make_grid(6.0, 601);
    const auto f = ScalarField::sample(g, [](double x) { return std::cos(x) * std::exp(-0.2 * x * x); });
    const auto back = diff(cumulative_integral(f), 1);
    CHECK(interior_max_error(back, f, 1) <= 1.0 * g.spacing() * g.spacing());
}
