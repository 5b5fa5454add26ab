#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "qdd/diagnostics.hpp"

namespace qdd {

/// One check on a scenario's series.
///   exponent         fitted algebraic exponent in [lower, upper], R^2 >= r2_min
///   rate             fitted exponential rate in [lower, upper], R^2 >= r2_min
///   max              max over samples <= value
///   min              min over samples > value
///   linear_bound     every sample <= value * (1 + t)
///   monotone         after t >= after, v[i+1] <= v[i] * (1 + ripple)
///   weighted_growth  weighted_energy_max(channels, t2) / weighted_energy_max(channels, t1) - 1 <= value
struct Assertion {
    std::string kind;
    std::string channel;
    std::vector<std::string> channels;
    std::optional<FitWindow> window;
    std::optional<double> lower;
    std::optional<double> upper;
    double r2_min = 0.0;
    double value = 0.0;
    double after = 0.0;
    double ripple = 0.0;
    double t1 = 0.0;
    double t2 = 0.0;
};

struct AssertionOutcome {
    bool passed = false;
    double observed = 0.0;
    std::string detail;
};

/// Evaluates one assertion; `fallback` is the window used when the assertion has none.
AssertionOutcome evaluate(const Assertion& assertion, const DecaySeries& series, FitWindow fallback);

std::string describe(const Assertion& assertion);

struct SuiteEntry {
    std::filesystem::path config;
    std::vector<Assertion> checks;
};

struct SuiteConfig {
    std::string name = "suite";
    std::vector<SuiteEntry> scenarios;
};

/// Scenario paths are resolved relative to `base_dir`. Throws config-invalid.
SuiteConfig parse_suite(std::string_view text, const std::filesystem::path& base_dir,
                        const std::string& source = "<string>");
SuiteConfig load_suite(const std::filesystem::path& path);

/// Number of concurrent scenarios: QDD_THREADS if set and positive, else the hardware concurrency.
unsigned suite_concurrency();

/// Runs every scenario (concurrently), writes <outdir>/<id>/... and <outdir>/acceptance_report.json,
/// prints a table on `out`. Returns 0 iff every assertion passes.
int run_acceptance(const std::filesystem::path& suite_path, const std::filesystem::path& outdir, std::ostream& out);

}  // namespace qdd
