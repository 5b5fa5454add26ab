#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "qdd/diagnostics.hpp"
#include "qdd/integrator.hpp"
#include "qdd/pressure.hpp"
#include "qdd/selfsimilar.hpp"

namespace qdd {

enum class ModelKind { unipolar, bipolar, unipolar_z };

std::string to_string(ModelKind model);

/// Zero-mass initial perturbation added to W(x) at t = 0.
///   dipole:    amplitude * sum_c d/dx exp(-(x - c)^2 / width^2)
///   bump_pair: amplitude * (exp(-(x - c0)^2 / width^2) - exp(-(x - c1)^2 / width^2))
///   none:      no perturbation
/// For bipolar runs carrier i receives signs[i] times the shape.
struct PerturbationConfig {
    std::string shape = "dipole";
    double amplitude = 0.01;
    double width = 1.0;
    std::vector<double> centers{0.0};
    std::array<double, 2> signs{1.0, -1.0};
};

struct ScenarioConfig {
    std::string id = "scenario";
    ModelKind model = ModelKind::unipolar;
    double epsilon = 0.1;
    double rho_minus = 1.0;
    double rho_plus = 1.1;
    double gamma = 2.0;
    double pressure_coeff = 1.0;

    double xi_max = 15.0;
    Index profile_points = 12001;

    /// Unset means "auto": 10 sqrt(t_end + 1) max(sqrt(max p'(rho_+-)), 1).
    std::optional<double> half_width;
    Index nodes = 4001;

    PerturbationConfig perturbation;

    double t_end = 100.0;
    /// Number M of geometric output intervals, t_m = (1 + t_end)^{m/M} - 1.
    int output_count = 60;
    /// "geometric" or "uniform".
    std::string schedule = "geometric";

    StepControls controls;
    std::optional<FitWindow> fit_window;

    PressureLaw law() const { return PressureLaw::power(gamma, pressure_coeff); }
    double resolved_half_width() const;
    FitWindow resolved_fit_window() const;
    std::vector<double> output_times() const;
};

/// Parses and validates a TOML scenario. Throws config-invalid naming the offending key.
ScenarioConfig parse_scenario(std::string_view text, const std::string& source = "<string>");
ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Fully resolved configuration ("auto" values expanded).
nlohmann::json to_json(const ScenarioConfig& config);

struct ScenarioResult {
    ScenarioConfig config;
    SelfSimilarProfile profile;
    double x0 = 0.0;
    DecaySeries series;
    nlohmann::json rates;
    nlohmann::json summary;
    /// Filled only on request: rho (unipolar), z (unipolar_z) or rho_a (bipolar) at each output.
    std::vector<ScalarField> snapshots;
};

/// Builds the initial data, solves the profile, runs the model and fits the decay channels.
ScenarioResult execute_scenario(const ScenarioConfig& config, bool keep_snapshots = false);

/// series.csv, profile.csv, rates.json, summary.json under `outdir`. Throws io-error.
void write_artifacts(const ScenarioResult& result, const std::filesystem::path& outdir);

/// Process exit codes.
inline constexpr int exit_ok = 0;
inline constexpr int exit_failed = 1;
inline constexpr int exit_config_invalid = 2;
inline constexpr int exit_step_failure = 3;
inline constexpr int exit_io_error = 4;

int exit_code_for(ErrorKind kind);

/// Loads, executes and writes a scenario. Errors are reported on `err` and in <outdir>/error.json.
int run_scenario(const std::filesystem::path& config_path, const std::filesystem::path& outdir, std::ostream& err);

/// Profile-only solve; writes <outdir>/profile.csv and <outdir>/profile.json.
int run_profile(const std::filesystem::path& config_path, const std::filesystem::path& outdir, std::ostream& err);

}  // namespace qdd
