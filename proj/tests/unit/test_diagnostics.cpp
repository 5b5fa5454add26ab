#include <doctest/doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "qdd/diagnostics.hpp"

using namespace qdd;

namespace {

DecaySeries synthetic(const std::function<double(double)>& fn, double t_end, int samples) {
    DecaySeries s({"c"});
    for (int m = 0; m <= samples; ++m) {
        const double t = std::pow(1.0 + t_end, double(m) / samples) - 1.0;
        s.append(t, {fn(t)});
    }
    return s;
}

DecaySeries uniform(const std::function<double(double)>& fn, double t_end, int samples) {
    DecaySeries s({"c"});
    for (int m = 0; m <= samples; ++m) {
        const double t = t_end * m / samples;
        s.append(t, {fn(t)});
    }
    return s;
}

}  // namespace

TEST_CASE("field norms") {
    const auto g = make_grid(std::numbers::pi, 2001);
    const auto zero = field_norms(ScalarField(g), 3);
    CHECK(zero.l2 == 0.0);
    CHECK(zero.linf == 0.0);
    CHECK(zero.h1 == 0.0);

    const auto s = ScalarField::sample(g, [](double x) { return std::sin(x); });
    const auto n = field_norms(s, 1);
    const double h2 = g.spacing() * g.spacing();
    CHECK(std::abs(n.l2 - std::sqrt(std::numbers::pi)) <= h2);
    CHECK(std::abs(n.linf - 1.0) <= h2);

    const auto n2 = field_norms(2.0 * s, 1);
    CHECK(n2.l2 == 2.0 * n.l2);
    CHECK(n2.linf == 2.0 * n.linf);
    CHECK(n2.h1 == doctest::Approx(2.0 * n.h1).epsilon(1e-15));
    CHECK(n.h1 == doctest::Approx(std::hypot(n.l2, n.derivative_l2[1])).epsilon(1e-15));
}

TEST_CASE("sup norm interpolation inequality on compactly supported samples") {
    const auto g = make_grid(10.0, 4001);
    for (double w : {0.3, 1.0, 2.5}) {
        const auto bump = ScalarField::sample(g, [w](double x) { return std::exp(-x * x / (w * w)) * std::cos(x); });
        const auto n = field_norms(bump, 1);
        CHECK(n.linf <= std::sqrt(2.0) * std::sqrt(n.l2 * n.derivative_l2[1]) * (1.0 + 1e-6));
    }
}

TEST_CASE("lp norms") {
    const auto g = make_grid(1.0, 2001);
    const auto one = ScalarField::sample(g, [](double) { return 1.0; });
    CHECK(lp_norm(one, 1.0) == doctest::Approx(2.0));
    CHECK(lp_norm(one, 3.0) == doctest::Approx(std::cbrt(2.0)));
    CHECK(lp_norm(one, std::numeric_limits<double>::infinity()) == 1.0);
    const auto tiny = ScalarField::sample(g, [](double) { return 1e-200; });
    CHECK(l2_norm(tiny) == doctest::Approx(1e-200 * std::sqrt(2.0)));
}

TEST_CASE("series bookkeeping") {
    DecaySeries s({"a", "b"});
    s.append(0.0, {1.0, 2.0});
    CHECK_THROWS_AS(s.append(0.0, {1.0, 2.0}), Error);
    CHECK_THROWS_AS(s.append(1.0, {-1.0, 2.0}), Error);
    CHECK_THROWS_AS(s.append(1.0, {NAN, 2.0}), Error);
    CHECK_THROWS_AS(s.append(1.0, {1.0}), Error);
    s.append(1.0, {0.5, 3.0});
    CHECK(s.max("b") == 3.0);
    CHECK(s.min("a") == 0.5);
    try {
        (void)s.channel("missing");
        FAIL("expected missing-channel");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::missing_channel);
    }
    std::ostringstream os;
    s.write_csv(os);
    const std::string csv = os.str();
    CHECK(csv.rfind("t,a,b\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("algebraic fits") {
    const auto exact = synthetic([](double t) { return 3.0 / std::sqrt(1.0 + t); }, 1000.0, 40);
    const auto fit = fit_algebraic_rate(exact, "c", {0.0, 1000.0});
    CHECK(std::abs(fit.rate + 0.5) <= 1e-12);
    CHECK(fit.amplitude == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-12));

    const auto wobbly =
        uniform([](double t) { return std::pow(1.0 + t, -0.75) * (1.0 + 0.1 * std::sin(t)); }, 1000.0, 2000);
    CHECK(std::abs(fit_algebraic_rate(wobbly, "c", {10.0, 1000.0}).rate + 0.75) <= 0.03);

    const auto flat = synthetic([](double) { return 0.2; }, 100.0, 20);
    const auto fflat = fit_algebraic_rate(flat, "c", {0.0, 100.0});
    CHECK(std::abs(fflat.rate) <= 1e-12);
    CHECK(fflat.r2 == 1.0);
}

TEST_CASE("exponential fits") {
    const auto exact = uniform([](double t) { return 2.0 * std::exp(-0.3 * t); }, 50.0, 50);
    const auto fit = fit_exponential_rate(exact, "c", {0.0, 50.0});
    CHECK(std::abs(fit.rate - 0.3) <= 1e-12);
    CHECK(fit.amplitude == doctest::Approx(2.0).epsilon(1e-12));

    const auto floored = uniform([](double t) { return std::exp(-0.3 * t) + 1e-12; }, 100.0, 100);
    CHECK(fit_exponential_rate(floored, "c", {0.0, 40.0}).rate == doctest::Approx(0.3).epsilon(0.01));

    const auto algebraic = synthetic([](double t) { return std::pow(1.0 + t, -0.5); }, 1000.0, 60);
    CHECK(fit_exponential_rate(algebraic, "c", {0.0, 1000.0}).r2 < 0.8);
}

TEST_CASE("fits are invariant under rescaling") {
    const auto base = uniform([](double t) { return std::exp(-0.1 * t) * (2.0 + std::cos(t)); }, 30.0, 60);
    DecaySeries scaled({"c"});
    for (std::size_t i = 0; i < base.size(); ++i) scaled.append(base.times()[i], {1024.0 * base.channel("c")[i]});
    for (auto fitter : {fit_algebraic_rate, fit_exponential_rate}) {
        const auto a = fitter(base, "c", {1.0, 30.0});
        const auto b = fitter(scaled, "c", {1.0, 30.0});
        CHECK(a.rate == doctest::Approx(b.rate).epsilon(1e-13));
        CHECK(b.amplitude == doctest::Approx(1024.0 * a.amplitude).epsilon(1e-13));
        CHECK(a.r2 == doctest::Approx(b.r2).epsilon(1e-13));
    }
}

TEST_CASE("fit error cases") {
    const auto few = uniform([](double t) { return 1.0 + t; }, 10.0, 5);
    try {
        (void)fit_algebraic_rate(few, "c", {0.0, 10.0});
        FAIL("expected insufficient-samples");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::insufficient_samples);
    }
    const auto zeros = uniform([](double t) { return t < 5.0 ? 1.0 : 0.0; }, 10.0, 20);
    try {
        (void)fit_exponential_rate(zeros, "c", {0.0, 10.0});
        FAIL("expected nonpositive-value");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::nonpositive_value);
    }
}

TEST_CASE("weighted energies") {
    const auto zero = uniform([](double) { return 0.0; }, 10.0, 10);
    CHECK(weighted_energy(zero, "c", 2) == 0.0);

    const auto saturating = synthetic([](double t) { return 1.0 / (1.0 + t); }, 100.0, 30);
    CHECK(weighted_energy(saturating, "c", 2) == doctest::Approx(1.0).epsilon(1e-14));

    // C (1 + t)^{-k/2} times a factor below one stays under C.
    const auto bounded = synthetic([](double t) { return 4.0 * std::pow(1.0 + t, -1.5) * (1.0 - 0.5 * std::exp(-t)); },
                                   100.0, 30);
    CHECK(weighted_energy(bounded, "c", 3) <= 4.0);

    DecaySeries multi({"k0", "k1"});
    for (double t : {0.0, 1.0, 3.0, 8.0}) multi.append(t, {0.5, 2.0 / std::sqrt(1.0 + t)});
    CHECK(weighted_energy_max(multi, {"k0", "k1"}) == doctest::Approx(2.0));
    CHECK(weighted_energy(multi, "k1", 0, 2.0) == doctest::Approx(2.0));
    CHECK_THROWS_AS(weighted_energy(multi, "nope", 0), Error);
}

TEST_CASE("mass defect") {
    const auto g = make_grid(10.0, 1001);
    const auto w = ScalarField::sample(g, [](double x) { return 1.0 + 0.05 * std::tanh(x); });
    CHECK(mass_defect(w, w) == 0.0);
    auto bumped = w;
    bumped.values() += ScalarField::sample(g, [](double x) { return 0.2 * std::exp(-x * x); }).values();
    CHECK(mass_defect(bumped, w) == doctest::Approx(0.2 * std::sqrt(std::numbers::pi)).epsilon(1e-9));
    const auto [a, b] = mass_defect(bumped, w, w);
    CHECK(a == mass_defect(bumped, w));
    CHECK(b == 0.0);
}

TEST_CASE("default fit window") {
    const auto w = default_fit_window(1000.0);
    CHECK(w.lo == 50.0);
    CHECK(w.hi == 800.0);
    CHECK(default_fit_window(100.0).lo == 10.0);
}
