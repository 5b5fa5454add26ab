#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "qdd/scenario.hpp"
#include "qdd/suite.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
    CLI::App app{"Quantum drift-diffusion simulator and decay-rate checker"};
    app.require_subcommand(1);

    std::string config;
    std::string outdir;
    auto* run = app.add_subcommand("run", "Run one scenario and write series.csv, profile.csv, rates.json, summary.json");
    run->add_option("config", config, "Scenario TOML file")->required();
    run->add_option("--outdir", outdir, "Output directory (default: runs/<config stem>)");

    std::string suite;
    auto* accept = app.add_subcommand("accept", "Run an acceptance suite and write acceptance_report.json");
    accept->add_option("suite", suite, "Suite TOML file")->required();
    accept->add_option("--outdir", outdir, "Output directory (default: acceptance/<suite stem>)");

    auto* profile = app.add_subcommand("profile", "Solve and export the self-similar profile only");
    profile->add_option("config", config, "Scenario TOML file")->required();
    profile->add_option("--outdir", outdir, "Output directory (default: profiles/<config stem>)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : qdd::exit_config_invalid;
    }

    if (*run) {
        const fs::path out = outdir.empty() ? fs::path("runs") / fs::path(config).stem() : fs::path(outdir);
        return qdd::run_scenario(config, out, std::cerr);
    }
    if (*accept) {
        const fs::path out = outdir.empty() ? fs::path("acceptance") / fs::path(suite).stem() : fs::path(outdir);
        return qdd::run_acceptance(suite, out, std::cout);
    }
    const fs::path out = outdir.empty() ? fs::path("profiles") / fs::path(config).stem() : fs::path(outdir);
    return qdd::run_profile(config, out, std::cerr);
}
