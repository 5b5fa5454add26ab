#include <doctest/doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qdd/scenario.hpp"
#include "qdd/suite.hpp"

using namespace qdd;
namespace fs = std::filesystem;

namespace {

const std::string minimal = R"(
id = "t"
rho_minus = 1.0
rho_plus = 1.1
)";

ErrorKind parse_error_kind(const std::string& text, std::string* message = nullptr) {
    try {
        (void)parse_scenario(text);
    } catch (const Error& e) {
        if (message) *message = e.what();
        return e.kind();
    }
    FAIL("expected a config error");
    return ErrorKind::invalid_argument;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("qdd_unit_" + name);
    fs::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("defaults and resolved values") {
    const auto c = parse_scenario(minimal);
    CHECK(c.model == ModelKind::unipolar);
    CHECK(c.epsilon == 0.1);
    CHECK(c.gamma == 2.0);
    CHECK(c.nodes == 4001);
    CHECK(c.t_end == 100.0);
    CHECK(!c.half_width.has_value());
    // p'(1.1) = 2.2 > 1: L = 10 sqrt(101) sqrt(2.2).
    CHECK(c.resolved_half_width() == doctest::Approx(10.0 * std::sqrt(101.0) * std::sqrt(2.2)));
    const auto w = c.resolved_fit_window();
    CHECK(w.lo == 10.0);
    CHECK(w.hi == 80.0);

    const auto t = c.output_times();
    REQUIRE(t.size() == 61);
    CHECK(t.front() == 0.0);
    CHECK(t.back() == 100.0);
    CHECK(t[30] == doctest::Approx(std::sqrt(101.0) - 1.0));
    for (std::size_t i = 1; i < t.size(); ++i) CHECK(t[i] > t[i - 1]);
}

TEST_CASE("full configuration round-trips into the resolved json") {
    const auto c = parse_scenario(R"(
id = "full"
model = "bipolar"
epsilon = 0.05
rho_minus = 1.0
rho_plus = 1.1
pressure = { kind = "power", gamma = 1.5, coeff = 2.0 }

[profile]
xi_max = 12.0
points = 2001

[grid]
L = "auto"
n = 801

[perturbation]
shape = "bump_pair"
amplitude = 0.002
width = 0.5
centers = [-1.0, 1.0]
signs = [1.0, -1.0]

[time]
t_end = 20.0
outputs = 30
schedule = "uniform"

[solver]
error_target = 1e-5
scheme = "bdf2"
jacobian = "finite_difference"

[fit]
window = [2.0, 15.0]
)");
    CHECK(c.model == ModelKind::bipolar);
    CHECK(c.controls.scheme == TimeScheme::bdf2);
    CHECK(c.controls.jacobian == JacobianMode::finite_difference);
    CHECK(c.perturbation.centers.size() == 2);
    CHECK(c.output_times()[15] == doctest::Approx(10.0));

    const auto j = to_json(c);
    CHECK(j["model"] == "bipolar");
    CHECK(j["pressure"]["kind"] == "power");
    CHECK(j["pressure"]["gamma"] == 1.5);
    CHECK(j["grid"]["L"].get<double>() == doctest::Approx(c.resolved_half_width()));
    CHECK(j["solver"]["scheme"] == "bdf2");
    CHECK(j["fit"]["window"][0] == 2.0);
}

TEST_CASE("validation names the offending key") {
    std::string msg;
    CHECK(parse_error_kind("rho_minus = 1.0\n", &msg) == ErrorKind::config_invalid);
    CHECK(msg.find("rho_plus") != std::string::npos);

    CHECK(parse_error_kind(minimal + "colour = 3\n", &msg) == ErrorKind::config_invalid);
    CHECK(msg.find("colour") != std::string::npos);

    CHECK(parse_error_kind(minimal + "[grid]\nn = 5\n", &msg) == ErrorKind::config_invalid);
    CHECK(msg.find("grid.n") != std::string::npos);

    CHECK(parse_error_kind(minimal + "[grid]\nsize = 5\n", &msg) == ErrorKind::config_invalid);
    CHECK(msg.find("grid.size") != std::string::npos);

    CHECK(parse_error_kind("rho_minus = -1.0\nrho_plus = 1.0\n", &msg) == ErrorKind::config_invalid);
    CHECK(msg.find("rho_minus") != std::string::npos);

    CHECK(parse_error_kind(minimal + "model = \"tripolar\"\n", &msg) == ErrorKind::config_invalid);
    CHECK(parse_error_kind(minimal + "pressure = { kind = \"tabulated\" }\n") == ErrorKind::config_invalid);
    CHECK(parse_error_kind(minimal + "pressure = { gamma = 0.5 }\n") == ErrorKind::config_invalid);
    CHECK(parse_error_kind(minimal + "[solver]\nscheme = \"rk4\"\n") == ErrorKind::config_invalid);
    CHECK(parse_error_kind(minimal + "[time]\nt_end = \"long\"\n", &msg) == ErrorKind::config_invalid);
    CHECK(msg.find("time.t_end") != std::string::npos);
    CHECK(parse_error_kind(minimal + "[fit]\nwindow = [5.0, 1.0]\n") == ErrorKind::config_invalid);
    CHECK(parse_error_kind("rho_minus = 1.0\nrho_plus = [\n") == ErrorKind::config_invalid);
}

TEST_CASE("perturbations that would break positivity are rejected at load") {
    std::string msg;
    CHECK(parse_error_kind(minimal + "[perturbation]\namplitude = 2.0\n", &msg) == ErrorKind::config_invalid);
    CHECK(msg.find("perturbation.amplitude") != std::string::npos);
    CHECK_NOTHROW(parse_scenario(minimal + "[perturbation]\namplitude = 0.3\n"));
}

TEST_CASE("exit codes") {
    CHECK(exit_code_for(ErrorKind::config_invalid) == 2);
    CHECK(exit_code_for(ErrorKind::step_failure) == 3);
    CHECK(exit_code_for(ErrorKind::io_error) == 4);
    CHECK(exit_code_for(ErrorKind::neutrality_violation) == 2);
}

TEST_CASE("missing config file is an io error") {
    try {
        (void)load_scenario("/nonexistent/none.toml");
        FAIL("expected io-error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::io_error);
    }
    std::ostringstream err;
    CHECK(run_scenario("/nonexistent/none.toml", scratch_dir("missing"), err) == exit_io_error);
}

TEST_CASE("trivial scenario writes deterministic artifacts") {
    const fs::path config = fs::path(QDD_SCENARIO_DIR) / "trivial_unipolar.toml";
    const auto a = scratch_dir("trivial_a");
    const auto b = scratch_dir("trivial_b");
    std::ostringstream err;
    REQUIRE(run_scenario(config, a, err) == exit_ok);
    REQUIRE(run_scenario(config, b, err) == exit_ok);
    for (const char* f : {"series.csv", "profile.csv", "rates.json", "summary.json"}) {
        REQUIRE(fs::exists(a / f));
        CHECK(slurp(a / f) == slurp(b / f));
    }
    const std::string csv = slurp(a / "series.csv");
    CHECK(csv.rfind("t,L2_k0,L2_k1,L2_k2,Linf,mass_defect,min_rho,dt", 0) == 0);

    const auto summary = nlohmann::json::parse(slurp(a / "summary.json"));
    CHECK(summary["delta"] == 0.0);
    CHECK(summary["config"]["grid"]["L"] == 20.0);
    CHECK(summary["max_mass_defect"].get<double>() <= 1e-12);

    const auto result = execute_scenario(load_scenario(config));
    for (const char* c : {"L2_k0", "L2_k1", "L2_k2", "Linf"}) CHECK(result.series.max(c) <= 1e-12);
}

TEST_CASE("broken scenario reports a machine-readable error") {
    const auto dir = scratch_dir("broken");
    fs::create_directories(dir);
    const auto config = dir / "broken.toml";
    std::ofstream(config) << "id = \"broken\"\nrho_minus = 1.0\n";
    std::ostringstream err;
    CHECK(run_scenario(config, dir / "out", err) == exit_config_invalid);
    CHECK(err.str().find("rho_plus") != std::string::npos);
    const auto record = nlohmann::json::parse(slurp(dir / "out" / "error.json"));
    CHECK(record["error"] == "config-invalid");
    CHECK(record["exit_code"] == 2);
}

TEST_CASE("assertions") {
    DecaySeries s({"a", "e"});
    for (int m = 0; m <= 30; ++m) {
        const double t = std::pow(101.0, m / 30.0) - 1.0;
        s.append(t, {2.0 / std::sqrt(1.0 + t), std::exp(-0.2 * t)});
    }
    const FitWindow all{1.0, 100.0};

    Assertion exp;
    exp.kind = "exponent";
    exp.channel = "a";
    exp.upper = -0.35;
    exp.r2_min = 0.9;
    CHECK(evaluate(exp, s, all).passed);
    CHECK(evaluate(exp, s, all).observed == doctest::Approx(-0.5));
    exp.lower = -0.1;
    exp.upper = 0.0;
    const auto bad = evaluate(exp, s, all);
    CHECK(!bad.passed);
    CHECK(describe(exp).find("exponent(a)") != std::string::npos);

    Assertion rate;
    rate.kind = "rate";
    rate.channel = "e";
    rate.lower = 0.0;
    rate.r2_min = 0.95;
    rate.window = FitWindow{1.0, 50.0};
    CHECK(evaluate(rate, s, all).passed);

    Assertion mx;
    mx.kind = "max";
    mx.channel = "a";
    mx.value = 2.0;
    CHECK(evaluate(mx, s, all).passed);
    mx.value = 1.9;
    CHECK(!evaluate(mx, s, all).passed);

    Assertion mn;
    mn.kind = "min";
    mn.channel = "e";
    mn.value = 0.0;
    CHECK(evaluate(mn, s, all).passed);

    Assertion lin;
    lin.kind = "linear_bound";
    lin.channel = "a";
    lin.value = 2.0;
    CHECK(evaluate(lin, s, all).passed);

    Assertion mono;
    mono.kind = "monotone";
    mono.channel = "a";
    CHECK(evaluate(mono, s, all).passed);

    Assertion grow;
    grow.kind = "weighted_growth";
    grow.channels = {"a"};
    grow.t1 = 10.0;
    grow.t2 = 100.0;
    grow.value = 0.05;
    CHECK(evaluate(grow, s, all).passed);

    Assertion missing;
    missing.kind = "max";
    missing.channel = "nope";
    const auto miss = evaluate(missing, s, all);
    CHECK(!miss.passed);
    CHECK(miss.detail.find("nope") != std::string::npos);
}

TEST_CASE("suite parsing") {
    const auto suite = parse_suite(R"(
name = "demo"
[[scenario]]
config = "a.toml"
check = [ { kind = "max", channel = "Linf", value = 1e-3 } ]
)",
                                   "/base");
    CHECK(suite.name == "demo");
    REQUIRE(suite.scenarios.size() == 1);
    CHECK(suite.scenarios[0].config == fs::path("/base/a.toml"));
    CHECK(suite.scenarios[0].checks[0].value == 1e-3);

    CHECK_THROWS_AS(parse_suite("[[scenario]]\ncheck = []\n", "/base"), Error);
    CHECK_THROWS_AS(parse_suite("[[scenario]]\nconfig = \"a.toml\"\ncheck = [ { kind = \"median\" } ]\n", "/base"),
                    Error);
}

TEST_CASE("trivial suite passes") {
    const auto out = scratch_dir("suite");
    std::ostringstream log;
    CHECK(run_acceptance(fs::path(QDD_SCENARIO_DIR) / "trivial_suite.toml", out, log) == 0);
    CHECK(log.str().find("suite passed") != std::string::npos);
    const auto report = nlohmann::json::parse(slurp(out / "acceptance_report.json"));
    CHECK(report["passed"] == true);
    CHECK(fs::exists(out / "trivial_bipolar" / "series.csv"));
}
