#include "qdd/suite.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

#include "qdd/error.hpp"
#include "qdd/scenario.hpp"
#include "toml_reader.hpp"

namespace qdd {

namespace {

using detail::invalid;
using detail::Reader;

std::string fmt(double v) {
    std::ostringstream s;
    s << std::setprecision(6) << v;
    return s.str();
}

AssertionOutcome check_fit(const Assertion& a, const DecaySeries& series, FitWindow window, RateKind kind) {
    const RateFit fit = kind == RateKind::algebraic ? fit_algebraic_rate(series, a.channel, window)
                                                    : fit_exponential_rate(series, a.channel, window);
    AssertionOutcome out;
    out.observed = fit.rate;
    bool ok = fit.r2 >= a.r2_min;
    if (a.lower) ok = ok && fit.rate >= *a.lower;
    if (a.upper) ok = ok && fit.rate <= *a.upper;
    out.passed = ok;
    out.detail = std::string(kind == RateKind::algebraic ? "exponent " : "rate ") + fmt(fit.rate) + ", R^2 " +
                 fmt(fit.r2) + " on [" + fmt(window.lo) + ", " + fmt(window.hi) + "], " +
                 std::to_string(fit.samples) + " samples";
    return out;
}

}  // namespace

std::string describe(const Assertion& a) {
    std::ostringstream s;
    if (a.kind == "exponent" || a.kind == "rate") {
        s << a.kind << "(" << a.channel << ")";
        if (a.lower) s << " >= " << fmt(*a.lower);
        if (a.upper) s << (a.lower ? " and" : "") << " <= " << fmt(*a.upper);
        if (a.r2_min > 0.0) s << ", R^2 >= " << fmt(a.r2_min);
    } else if (a.kind == "max") {
        s << "max(" << a.channel << ") <= " << fmt(a.value);
    } else if (a.kind == "min") {
        s << "min(" << a.channel << ") > " << fmt(a.value);
    } else if (a.kind == "linear_bound") {
        s << a.channel << " <= " << fmt(a.value) << " (1 + t)";
    } else if (a.kind == "monotone") {
        s << a.channel << " nonincreasing after t = " << fmt(a.after) << " (ripple " << fmt(a.ripple) << ")";
    } else if (a.kind == "weighted_growth") {
        s << "weighted energy growth " << fmt(a.t1) << " -> " << fmt(a.t2) << " <= " << fmt(a.value);
    } else {
        s << a.kind;
    }
    return s.str();
}

AssertionOutcome evaluate(const Assertion& a, const DecaySeries& series, FitWindow fallback) {
    try {
        const FitWindow window = a.window.value_or(fallback);
        if (a.kind == "exponent") return check_fit(a, series, window, RateKind::algebraic);
        if (a.kind == "rate") return check_fit(a, series, window, RateKind::exponential);
        AssertionOutcome out;
        if (a.kind == "max") {
            out.observed = series.max(a.channel);
            out.passed = out.observed <= a.value;
            out.detail = "max " + fmt(out.observed);
        } else if (a.kind == "min") {
            out.observed = series.min(a.channel);
            out.passed = out.observed > a.value;
            out.detail = "min " + fmt(out.observed);
        } else if (a.kind == "linear_bound") {
            const auto& v = series.channel(a.channel);
            const auto& t = series.times();
            double worst = 0.0;
            for (std::size_t i = 0; i < v.size(); ++i) worst = std::max(worst, v[i] / (1.0 + t[i]));
            out.observed = worst;
            out.passed = worst <= a.value;
            out.detail = "max value / (1 + t) = " + fmt(worst);
        } else if (a.kind == "monotone") {
            const auto& v = series.channel(a.channel);
            const auto& t = series.times();
            double worst = 0.0;
            for (std::size_t i = 0; i + 1 < v.size(); ++i) {
                if (t[i] < a.after) continue;
                if (v[i] > 0.0) worst = std::max(worst, v[i + 1] / v[i] - 1.0);
                else if (v[i + 1] > 0.0) worst = std::numeric_limits<double>::infinity();
            }
            out.observed = worst;
            out.passed = worst <= a.ripple;
            out.detail = "largest relative rise " + fmt(worst);
        } else if (a.kind == "weighted_growth") {
            const double e1 = weighted_energy_max(series, a.channels, a.t1);
            const double e2 = weighted_energy_max(series, a.channels, a.t2);
            out.observed = e1 > 0.0 ? e2 / e1 - 1.0 : (e2 > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
            out.passed = out.observed <= a.value;
            out.detail = "delta_T(" + fmt(a.t1) + ") = " + fmt(e1) + ", delta_T(" + fmt(a.t2) + ") = " + fmt(e2);
        } else {
            out.detail = "unknown assertion kind '" + a.kind + "'";
        }
        return out;
    } catch (const Error& e) {
        return AssertionOutcome{false, std::numeric_limits<double>::quiet_NaN(), e.what()};
    }
}

SuiteConfig parse_suite(std::string_view text, const std::filesystem::path& base_dir, const std::string& source) {
    toml::table root;
    try {
        root = toml::parse(text, source);
    } catch (const toml::parse_error& e) {
        invalid("cannot parse " + source + ": " + std::string(e.description()));
    }
    const Reader r(root, "");
    r.allow({"name", "scenario"});
    SuiteConfig suite;
    suite.name = r.text("name", suite.name);
    const auto* list = root.get_as<toml::array>("scenario");
    if (!list || list->empty()) invalid("suite needs at least one [[scenario]] entry");
    for (std::size_t i = 0; i < list->size(); ++i) {
        const auto* table = list->get(i)->as_table();
        if (!table) invalid("scenario entries must be tables");
        const Reader s(*table, "scenario[" + std::to_string(i) + "]");
        s.allow({"config", "check"});
        SuiteEntry entry;
        const std::string cfg = s.text("config", "");
        if (cfg.empty()) invalid("missing required key '" + s.path("config") + "'");
        entry.config = base_dir / cfg;
        if (const auto* checks = table->get_as<toml::array>("check")) {
            for (std::size_t k = 0; k < checks->size(); ++k) {
                const auto* ct = checks->get(k)->as_table();
                if (!ct) invalid("check entries must be tables");
                const Reader c(*ct, s.path("check[" + std::to_string(k) + "]"));
                c.allow({"kind", "channel", "channels", "window", "min", "max", "r2_min", "value", "after", "ripple",
                         "t1", "t2"});
                Assertion a;
                a.kind = c.text("kind", "");
                static const std::set<std::string> kinds{"exponent", "rate", "max", "min", "linear_bound", "monotone",
                                                         "weighted_growth"};
                if (!kinds.count(a.kind)) invalid("unknown check kind '" + a.kind + "' at " + c.path("kind"));
                if (a.kind == "weighted_growth") {
                    if (!c.has("channels")) invalid("missing required key '" + c.path("channels") + "'");
                    const auto* arr = ct->get_as<toml::array>("channels");
                    if (!arr) invalid("key '" + c.path("channels") + "' must be an array of strings");
                    for (std::size_t j = 0; j < arr->size(); ++j) {
                        const auto v = arr->get(j)->value_exact<std::string>();
                        if (!v) invalid("key '" + c.path("channels") + "' must be an array of strings");
                        a.channels.push_back(*v);
                    }
                    a.t1 = c.real("t1");
                    a.t2 = c.real("t2");
                    a.value = c.real("value");
                } else {
                    a.channel = c.text("channel", "");
                    if (a.channel.empty()) invalid("missing required key '" + c.path("channel") + "'");
                }
                if (c.has("window")) {
                    const auto w = c.reals("window");
                    if (w.size() != 2 || !(w[0] < w[1])) invalid(c.path("window") + " must be [lo, hi] with lo < hi");
                    a.window = FitWindow{w[0], w[1]};
                }
                if (c.has("min")) a.lower = c.real("min");
                if (c.has("max")) a.upper = c.real("max");
                a.r2_min = c.real("r2_min", 0.0);
                if (a.kind == "max" || a.kind == "min" || a.kind == "linear_bound") a.value = c.real("value");
                a.after = c.real("after", 0.0);
                a.ripple = c.real("ripple", 0.0);
                entry.checks.push_back(std::move(a));
            }
        }
        suite.scenarios.push_back(std::move(entry));
    }
    return suite;
}

SuiteConfig load_suite(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io_error, "cannot read '" + path.string() + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_suite(text.str(), path.parent_path(), path.string());
}

unsigned suite_concurrency() {
    if (const char* env = std::getenv("QDD_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

struct ScenarioReport {
    std::string id;
    std::filesystem::path config;
    int exit_code = exit_ok;
    std::string error;
    std::vector<std::pair<Assertion, AssertionOutcome>> outcomes;
};

ScenarioReport run_entry(const SuiteEntry& entry, const std::filesystem::path& outdir) {
    ScenarioReport report;
    report.config = entry.config;
    report.id = entry.config.stem().string();
    try {
        const ScenarioConfig config = load_scenario(entry.config);
        report.id = config.id;
        const ScenarioResult result = execute_scenario(config);
        write_artifacts(result, outdir / config.id);
        for (const auto& a : entry.checks)
            report.outcomes.emplace_back(a, evaluate(a, result.series, config.resolved_fit_window()));
    } catch (const Error& e) {
        report.exit_code = exit_code_for(e.kind());
        report.error = e.what();
    } catch (const std::exception& e) {
        report.exit_code = exit_failed;
        report.error = e.what();
    }
    return report;
}

}  // namespace

int run_acceptance(const std::filesystem::path& suite_path, const std::filesystem::path& outdir, std::ostream& out) {
    SuiteConfig suite;
    try {
        suite = load_suite(suite_path);
    } catch (const Error& e) {
        out << "qdd: " << e.what() << "\n";
        return exit_code_for(e.kind());
    }

    std::vector<ScenarioReport> reports(suite.scenarios.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < suite.scenarios.size(); i = next++) reports[i] = run_entry(suite.scenarios[i], outdir);
    };
    const unsigned threads = std::min<unsigned>(suite_concurrency(), static_cast<unsigned>(suite.scenarios.size()));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    bool all = true;
    nlohmann::json scenarios = nlohmann::json::array();
    out << std::left << std::setw(24) << "scenario" << std::setw(6) << "pass" << "check / observed\n";
    for (const auto& r : reports) {
        nlohmann::json checks = nlohmann::json::array();
        if (r.exit_code != exit_ok) {
            all = false;
            out << std::setw(24) << r.id << std::setw(6) << "FAIL" << r.error << "\n";
        }
        for (const auto& [a, o] : r.outcomes) {
            all = all && o.passed;
            out << std::setw(24) << r.id << std::setw(6) << (o.passed ? "PASS" : "FAIL") << describe(a) << " | "
                << o.detail << "\n";
            checks.push_back({{"check", describe(a)},
                              {"kind", a.kind},
                              {"channel", a.kind == "weighted_growth" ? nlohmann::json(a.channels) : nlohmann::json(a.channel)},
                              {"observed", std::isfinite(o.observed) ? nlohmann::json(o.observed) : nlohmann::json(nullptr)},
                              {"passed", o.passed},
                              {"detail", o.detail}});
        }
        nlohmann::json entry = {{"id", r.id}, {"config", r.config.string()}, {"exit_code", r.exit_code}, {"checks", checks}};
        if (!r.error.empty()) entry["error"] = r.error;
        scenarios.push_back(entry);
    }
    const nlohmann::json report = {{"suite", suite.name}, {"passed", all}, {"scenarios", scenarios}};
    std::error_code ec;
    std::filesystem::create_directories(outdir, ec);
    std::ofstream file(outdir / "acceptance_report.json", std::ios::binary);
    if (!file) {
        out << "qdd: cannot write " << (outdir / "acceptance_report.json").string() << "\n";
        return exit_io_error;
    }
    file << report.dump(2) << "\n";
    out << (all ? "suite passed\n" : "suite FAILED\n");
    return all ? exit_ok : exit_failed;
}

}  // namespace qdd
