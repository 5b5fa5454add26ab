#include "qdd/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "qdd/bipolar.hpp"
#include "qdd/error.hpp"
#include "qdd/unipolar.hpp"
#include "toml_reader.hpp"

namespace qdd {

std::string to_string(ModelKind model) {
    switch (model) {
        case ModelKind::unipolar: return "unipolar";
        case ModelKind::bipolar: return "bipolar";
        case ModelKind::unipolar_z: return "unipolar_z";
    }
    return "unknown";
}

namespace {

using detail::invalid;
using detail::Reader;

void require(bool ok, const std::string& message) {
    if (!ok) invalid(message);
}

double gaussian(double x, double c, double w) {
    const double s = (x - c) / w;
    return std::exp(-s * s);
}

// Density perturbation before the per-carrier sign.
double perturbation_density(const PerturbationConfig& p, double x) {
    double v = 0.0;
    if (p.shape == "dipole") {
        for (double c : p.centers) v += -2.0 * (x - c) / (p.width * p.width) * gaussian(x, c, p.width);
    } else if (p.shape == "bump_pair") {
        v = gaussian(x, p.centers[0], p.width) - gaussian(x, p.centers[1], p.width);
    }
    return p.amplitude * v;
}

double perturbation_sup(const PerturbationConfig& p, const Grid1D& grid) {
    double sup = 0.0;
    for (Index j = 0; j < grid.size(); ++j) sup = std::max(sup, std::abs(perturbation_density(p, grid.x(j))));
    return sup;
}

double h3_norm(const ScalarField& z) {
    double sum = 0.0;
    const double l2 = l2_norm(z);
    sum += l2 * l2;
    for (int k = 1; k <= 3; ++k) {
        const double v = l2_norm(diff(z, k));
        sum += v * v;
    }
    return std::sqrt(sum);
}

std::vector<std::string> algebraic_channels(ModelKind model) {
    switch (model) {
        case ModelKind::unipolar:
            return {"L2_k0", "L2_k1", "L2_k2", "Linf", "z_L2_k0", "z_L2_k1", "z_L2_k2", "z_L2_k3"};
        case ModelKind::unipolar_z:
            return {"z_L2_k0", "z_L2_k1", "z_L2_k2", "z_L2_k3", "z_Linf_k0", "z_Linf_k1", "z_Linf_k2"};
        case ModelKind::bipolar:
            return {"L2_k0_a", "L2_k1_a", "L2_k2_a", "Linf_a", "L2_k0_b", "L2_k1_b", "L2_k2_b", "Linf_b"};
    }
    return {};
}

std::vector<std::string> exponential_channels(ModelKind model) {
    if (model == ModelKind::bipolar) return {"L2_E", "L2_Ex", "H1_E", "L2_diff"};
    return {};
}

nlohmann::json fit_record(const DecaySeries& series, const std::string& channel, FitWindow window, RateKind kind) {
    try {
        const RateFit fit = kind == RateKind::algebraic ? fit_algebraic_rate(series, channel, window)
                                                        : fit_exponential_rate(series, channel, window);
        return to_json(fit);
    } catch (const Error& e) {
        return {{"channel", channel},
                {"kind", kind == RateKind::algebraic ? "algebraic" : "exponential"},
                {"window", {window.lo, window.hi}},
                {"error", std::string(to_string(e.kind()))},
                {"message", e.detail()}};
    }
}

double channel_max(const DecaySeries& s, std::initializer_list<const char*> names) {
    double out = 0.0;
    for (const char* n : names)
        if (s.has_channel(n)) out = std::max(out, s.max(n));
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::io_error, "cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) fail(ErrorKind::io_error, "failed writing '" + path.string() + "'");
}

}  // namespace

double ScenarioConfig::resolved_half_width() const {
    if (half_width) return *half_width;
    const PressureLaw pl = law();
    const double speed = std::sqrt(std::max(pl.dp(rho_minus), pl.dp(rho_plus)));
    return 10.0 * std::sqrt(t_end + 1.0) * std::max(speed, 1.0);
}

FitWindow ScenarioConfig::resolved_fit_window() const { return fit_window.value_or(default_fit_window(t_end)); }

std::vector<double> ScenarioConfig::output_times() const {
    std::vector<double> t(static_cast<std::size_t>(output_count) + 1);
    for (int m = 0; m <= output_count; ++m) {
        const double s = static_cast<double>(m) / output_count;
        t[m] = schedule == "uniform" ? t_end * s : std::pow(1.0 + t_end, s) - 1.0;
    }
    t.front() = 0.0;
    t.back() = t_end;
    return t;
}

ScenarioConfig parse_scenario(std::string_view text, const std::string& source) {
    toml::table root;
    try {
        root = toml::parse(text, source);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "cannot parse " << source << ": " << e.description() << " (line " << e.source().begin.line << ")";
        invalid(msg.str());
    }
    const Reader r(root, "");
    r.allow({"id", "model", "epsilon", "rho_minus", "rho_plus", "pressure", "profile", "grid", "perturbation", "time",
             "solver", "fit"});

    ScenarioConfig c;
    c.id = r.text("id", c.id);
    require(!c.id.empty() && c.id.find_first_of("/\\") == std::string::npos, "id must be a plain non-empty name");
    const std::string model = r.text("model", "unipolar");
    if (model == "unipolar") c.model = ModelKind::unipolar;
    else if (model == "bipolar") c.model = ModelKind::bipolar;
    else if (model == "unipolar_z") c.model = ModelKind::unipolar_z;
    else invalid("model must be one of unipolar, bipolar, unipolar_z; got '" + model + "'");

    c.epsilon = r.real("epsilon", c.epsilon);
    c.rho_minus = r.real("rho_minus");
    c.rho_plus = r.real("rho_plus");
    require(std::isfinite(c.epsilon) && c.epsilon >= 0.0, "epsilon must be >= 0");
    require(std::isfinite(c.rho_minus) && c.rho_minus > 0.0, "rho_minus must be positive");
    require(std::isfinite(c.rho_plus) && c.rho_plus > 0.0, "rho_plus must be positive");

    if (auto p = r.sub("pressure")) {
        p->allow({"kind", "gamma", "coeff"});
        const std::string kind = p->text("kind", "power");
        require(kind == "power", "pressure.kind must be 'power'");
        c.gamma = p->real("gamma", c.gamma);
        c.pressure_coeff = p->real("coeff", c.pressure_coeff);
    }
    require(c.gamma >= 1.0 && std::isfinite(c.gamma), "pressure.gamma must be >= 1");
    require(c.pressure_coeff > 0.0 && std::isfinite(c.pressure_coeff), "pressure.coeff must be positive");

    if (auto p = r.sub("profile")) {
        p->allow({"xi_max", "points"});
        c.xi_max = p->real("xi_max", c.xi_max);
        c.profile_points = static_cast<Index>(p->integer("points", c.profile_points));
    }
    require(c.xi_max > 0.0, "profile.xi_max must be positive");
    require(c.profile_points >= Grid1D::min_nodes, "profile.points must be >= 7");

    if (auto t = r.sub("time")) {
        t->allow({"t_end", "outputs", "schedule"});
        c.t_end = t->real("t_end", c.t_end);
        c.output_count = static_cast<int>(t->integer("outputs", c.output_count));
        c.schedule = t->text("schedule", c.schedule);
    }
    require(c.t_end > 0.0 && std::isfinite(c.t_end), "time.t_end must be positive");
    require(c.output_count >= 1, "time.outputs must be >= 1");
    require(c.schedule == "geometric" || c.schedule == "uniform", "time.schedule must be geometric or uniform");

    if (auto g = r.sub("grid")) {
        g->allow({"L", "n"});
        if (const auto* node = g->raw("L")) {
            if (const auto s = node->value_exact<std::string>()) {
                require(*s == "auto", "grid.L must be a number or \"auto\"");
            } else {
                c.half_width = g->real("L");
                require(*c.half_width > 0.0 && std::isfinite(*c.half_width), "grid.L must be positive");
            }
        }
        c.nodes = static_cast<Index>(g->integer("n", c.nodes));
    }
    require(c.nodes >= Grid1D::min_nodes, "grid.n must be >= 7");

    if (auto p = r.sub("perturbation")) {
        p->allow({"shape", "amplitude", "width", "centers", "center", "signs"});
        auto& q = c.perturbation;
        q.shape = p->text("shape", q.shape);
        q.amplitude = p->real("amplitude", q.amplitude);
        q.width = p->real("width", q.width);
        if (p->has("center")) q.centers = {p->real("center")};
        if (p->has("centers")) q.centers = p->reals("centers");
        if (p->has("signs")) {
            const auto s = p->reals("signs");
            require(s.size() == 2, "perturbation.signs must have two entries (carrier a, carrier b)");
            q.signs = {s[0], s[1]};
        }
    }
    {
        const auto& q = c.perturbation;
        require(q.shape == "dipole" || q.shape == "bump_pair" || q.shape == "none",
                "perturbation.shape must be dipole, bump_pair or none");
        require(std::isfinite(q.amplitude) && q.amplitude >= 0.0, "perturbation.amplitude must be >= 0");
        require(q.width > 0.0 && std::isfinite(q.width), "perturbation.width must be positive");
        require(q.shape != "bump_pair" || q.centers.size() == 2, "perturbation.centers must have two entries for bump_pair");
        require(q.shape != "dipole" || !q.centers.empty(), "perturbation.centers must not be empty");
    }

    if (auto s = r.sub("solver")) {
        s->allow({"error_target", "newton_tol", "newton_max_iter", "positivity_floor", "dt_initial", "dt_max_coeff",
                  "growth", "max_halvings", "relative_target", "scheme", "jacobian"});
        auto& k = c.controls;
        k.error_target = s->real("error_target", k.error_target);
        k.newton_tol = s->real("newton_tol", k.newton_tol);
        k.newton_max_iter = static_cast<int>(s->integer("newton_max_iter", k.newton_max_iter));
        k.positivity_floor = s->real("positivity_floor", k.positivity_floor);
        k.dt_initial = s->real("dt_initial", k.dt_initial);
        k.dt_max_coeff = s->real("dt_max_coeff", k.dt_max_coeff);
        k.growth = s->real("growth", k.growth);
        k.max_halvings = static_cast<int>(s->integer("max_halvings", k.max_halvings));
        k.relative_target = s->real("relative_target", k.relative_target);
        try {
            k.scheme = time_scheme_from_string(s->text("scheme", to_string(k.scheme)));
            k.jacobian = jacobian_mode_from_string(s->text("jacobian", to_string(k.jacobian)));
        } catch (const Error& e) {
            invalid("solver: " + e.detail());
        }
    }
    {
        const auto& k = c.controls;
        require(k.error_target > 0.0, "solver.error_target must be positive");
        require(k.newton_tol > 0.0, "solver.newton_tol must be positive");
        require(k.newton_max_iter >= 1, "solver.newton_max_iter must be >= 1");
        require(k.positivity_floor > 0.0 && k.positivity_floor < 1.0, "solver.positivity_floor must be in (0, 1)");
        require(k.dt_initial > 0.0, "solver.dt_initial must be positive");
        require(k.dt_max_coeff > 0.0, "solver.dt_max_coeff must be positive");
        require(k.growth > 1.0, "solver.growth must be > 1");
        require(k.max_halvings >= 0, "solver.max_halvings must be >= 0");
        require(k.relative_target > 0.0, "solver.relative_target must be positive");
    }

    if (auto f = r.sub("fit")) {
        f->allow({"window"});
        if (f->has("window")) {
            const auto w = f->reals("window");
            require(w.size() == 2 && w[0] < w[1], "fit.window must be [lo, hi] with lo < hi");
            c.fit_window = FitWindow{w[0], w[1]};
        }
    }

    // W lies between the end states, so this bound guarantees W + z0_x > 0.
    const Grid1D grid(c.resolved_half_width(), c.nodes);
    const double sup = perturbation_sup(c.perturbation, grid) *
                       std::max(std::abs(c.perturbation.signs[0]), std::abs(c.perturbation.signs[1]));
    const double floor = c.controls.positivity_floor * std::min(c.rho_minus, c.rho_plus);
    require(std::min(c.rho_minus, c.rho_plus) - sup > floor,
            "perturbation.amplitude is too large: the initial density would not stay positive");
    return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io_error, "cannot read '" + path.string() + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_scenario(text.str(), path.string());
}

nlohmann::json to_json(const ScenarioConfig& c) {
    const auto& k = c.controls;
    const FitWindow w = c.resolved_fit_window();
    return {
        {"id", c.id},
        {"model", to_string(c.model)},
        {"epsilon", c.epsilon},
        {"rho_minus", c.rho_minus},
        {"rho_plus", c.rho_plus},
        {"pressure", {{"kind", "power"}, {"gamma", c.gamma}, {"coeff", c.pressure_coeff}}},
        {"profile", {{"xi_max", c.xi_max}, {"points", c.profile_points}}},
        {"grid", {{"L", c.resolved_half_width()}, {"n", c.nodes}, {"h", Grid1D(c.resolved_half_width(), c.nodes).spacing()}}},
        {"perturbation",
         {{"shape", c.perturbation.shape},
          {"amplitude", c.perturbation.amplitude},
          {"width", c.perturbation.width},
          {"centers", c.perturbation.centers},
          {"signs", c.perturbation.signs}}},
        {"time", {{"t_end", c.t_end}, {"outputs", c.output_count}, {"schedule", c.schedule}}},
        {"solver",
         {{"error_target", k.error_target},
          {"newton_tol", k.newton_tol},
          {"newton_max_iter", k.newton_max_iter},
          {"positivity_floor", k.positivity_floor},
          {"dt_initial", k.dt_initial},
          {"dt_max_coeff", k.dt_max_coeff},
          {"growth", k.growth},
          {"max_halvings", k.max_halvings},
          {"relative_target", k.relative_target},
          {"scheme", to_string(k.scheme)},
          {"jacobian", to_string(k.jacobian)}}},
        {"fit", {{"window", {w.lo, w.hi}}}},
    };
}

ScenarioResult execute_scenario(const ScenarioConfig& c, bool keep_snapshots) {
    const PressureLaw law = c.law();
    SelfSimilarProfile profile = solve_profile(law, c.rho_minus, c.rho_plus, c.xi_max, c.profile_points);
    const Grid1D grid(c.resolved_half_width(), c.nodes);
    const ScalarField base = eval_wave(profile, 0.0, grid, 0.0, 0);
    const ScalarField bump = ScalarField::sample(grid, [&](double x) { return perturbation_density(c.perturbation, x); },
                                                 FarField<double>{0.0, 0.0});
    const double bump_mass = integrate(bump);
    const double bump_l1 = integrate(ScalarField(grid, bump.values().cwiseAbs()));
    if (std::abs(bump_mass) > 1e-10 * std::max(1.0, bump_l1))
        invalid("the perturbation does not have zero mass on the grid (centers too close to the boundary?)");

    const double floor = c.controls.positivity_floor * std::min(c.rho_minus, c.rho_plus);
    auto carrier = [&](double sign) {
        ScalarField rho = base + sign * bump;
        rho.set_far_field({c.rho_minus, c.rho_plus});
        if (!(rho.values().minCoeff() > floor)) invalid("initial density is not above the positivity floor");
        return rho;
    };

    RunOptions options;
    options.outputs = c.output_times();
    options.controls = c.controls;
    options.keep_snapshots = keep_snapshots;

    // With equal end states every translate of W is the same constant, so x0 = 0.
    auto shift = [&](const ScalarField& rho) { return c.rho_minus == c.rho_plus ? 0.0 : compute_shift(rho, profile); };

    DecaySeries series;
    std::vector<ScalarField> snapshots;
    double x0 = 0.0;
    double delta0 = 0.0;
    nlohmann::json steps;
    auto record_stats = [&](const StepStats& s) {
        steps = {{"accepted", s.accepted}, {"rejected", s.rejected}, {"newton_iterations", s.newton_iterations}};
    };

    if (c.model == ModelKind::bipolar) {
        const ScalarField rho_a = carrier(c.perturbation.signs[0]);
        const ScalarField rho_b = carrier(c.perturbation.signs[1]);
        x0 = shift(rho_a);
        const ScalarField w = eval_wave(profile, x0, grid, 0.0, 0);
        delta0 = h3_norm(to_perturbation(rho_a, w).z) + h3_norm(to_perturbation(rho_b, w).z);
        BipolarRun run = simulate_bipolar(rho_a, rho_b, law, c.epsilon, profile, x0, options);
        series = std::move(run.series);
        for (auto& s : run.snapshots) snapshots.push_back(std::move(s.rho_a));
        record_stats(run.stats);
    } else {
        const ScalarField rho0 = carrier(1.0);
        x0 = shift(rho0);
        const ScalarField z0 = to_perturbation(rho0, eval_wave(profile, x0, grid, 0.0, 0)).z;
        delta0 = h3_norm(z0);
        if (c.model == ModelKind::unipolar) {
            UnipolarRun run = simulate_unipolar(rho0, law, c.epsilon, profile, x0, options);
            series = std::move(run.series);
            snapshots = std::move(run.snapshots);
            record_stats(run.stats);
        } else {
            PerturbationRun run = simulate_perturbation(z0, profile, x0, law, c.epsilon, options);
            series = std::move(run.series);
            snapshots = std::move(run.snapshots);
            record_stats(run.stats);
        }
    }

    const FitWindow window = c.resolved_fit_window();
    nlohmann::json fits = nlohmann::json::array();
    for (const auto& ch : algebraic_channels(c.model)) fits.push_back(fit_record(series, ch, window, RateKind::algebraic));
    for (const auto& ch : exponential_channels(c.model))
        fits.push_back(fit_record(series, ch, window, RateKind::exponential));
    nlohmann::json rates = {{"scenario", c.id}, {"fits", fits}};

    double delta_t = 0.0;
    if (c.model == ModelKind::bipolar) {
        for (const char* s : {"_a", "_b"}) {
            std::vector<std::string> chans;
            for (int k = 0; k <= 3; ++k) chans.push_back("z_L2_k" + std::to_string(k) + s);
            delta_t = std::max(delta_t, weighted_energy_max(series, chans));
        }
    } else {
        delta_t = weighted_energy_max(series, {"z_L2_k0", "z_L2_k1", "z_L2_k2", "z_L2_k3"});
    }
    double min_density = std::numeric_limits<double>::infinity();
    for (const char* ch : {"min_rho", "min_rho_a", "min_rho_b"})
        if (series.has_channel(ch)) min_density = std::min(min_density, series.min(ch));

    const double delta = std::abs(c.rho_plus - c.rho_minus);
    series.metadata() = {{"id", c.id},
                         {"model", to_string(c.model)},
                         {"law", law.describe()},
                         {"epsilon", std::to_string(c.epsilon)},
                         {"L", std::to_string(grid.half_width())},
                         {"n", std::to_string(grid.size())}};

    nlohmann::json summary = {
        {"id", c.id},
        {"model", to_string(c.model)},
        {"delta", delta},
        {"delta0", delta0},
        {"delta_T", delta_t},
        {"x0", x0},
        {"profile_residual", profile.residual()},
        {"min_density", min_density},
        {"max_mass_defect", channel_max(series, {"mass_defect", "mass_defect_a", "mass_defect_b"})},
        {"max_mass_drift", channel_max(series, {"mass_drift", "mass_drift_a", "mass_drift_b"})},
        {"samples", series.size()},
        {"steps", steps},
        {"config", to_json(c)},
    };
    return ScenarioResult{c, std::move(profile), x0, std::move(series), std::move(rates), std::move(summary),
                          std::move(snapshots)};
}

void write_artifacts(const ScenarioResult& result, const std::filesystem::path& outdir) {
    std::error_code ec;
    std::filesystem::create_directories(outdir, ec);
    if (ec) fail(ErrorKind::io_error, "cannot create '" + outdir.string() + "': " + ec.message());
    std::ostringstream series;
    result.series.write_csv(series);
    write_text(outdir / "series.csv", series.str());
    std::ostringstream profile;
    write_profile_csv(result.profile, profile);
    write_text(outdir / "profile.csv", profile.str());
    write_text(outdir / "rates.json", result.rates.dump(2) + "\n");
    write_text(outdir / "summary.json", result.summary.dump(2) + "\n");
}

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config_invalid:
        case ErrorKind::positivity_violation:
        case ErrorKind::neutrality_violation:
        case ErrorKind::degenerate_shift:
        case ErrorKind::invalid_argument:
            return exit_config_invalid;
        case ErrorKind::step_failure: return exit_step_failure;
        case ErrorKind::io_error: return exit_io_error;
        default: return exit_failed;
    }
}

namespace {

int report_error(const Error& e, const std::filesystem::path& outdir, std::ostream& err) {
    const int code = exit_code_for(e.kind());
    err << "qdd: " << e.what() << "\n";
    if (!outdir.empty()) {
        const nlohmann::json record = {{"error", std::string(to_string(e.kind()))}, {"message", e.detail()}, {"exit_code", code}};
        std::error_code ec;
        std::filesystem::create_directories(outdir, ec);
        std::ofstream out(outdir / "error.json", std::ios::binary);
        if (out) out << record.dump(2) << "\n";
    }
    return code;
}

template <class Body>
int guarded(const std::filesystem::path& outdir, std::ostream& err, Body&& body) {
    try {
        return body();
    } catch (const Error& e) {
        return report_error(e, outdir, err);
    } catch (const std::exception& e) {
        err << "qdd: " << e.what() << "\n";
        return exit_failed;
    }
}

}  // namespace

int run_scenario(const std::filesystem::path& config_path, const std::filesystem::path& outdir, std::ostream& err) {
    return guarded(outdir, err, [&] {
        const ScenarioConfig config = load_scenario(config_path);
        const ScenarioResult result = execute_scenario(config);
        write_artifacts(result, outdir);
        return exit_ok;
    });
}

int run_profile(const std::filesystem::path& config_path, const std::filesystem::path& outdir, std::ostream& err) {
    return guarded(outdir, err, [&] {
        const ScenarioConfig c = load_scenario(config_path);
        const SelfSimilarProfile profile = solve_profile(c.law(), c.rho_minus, c.rho_plus, c.xi_max, c.profile_points);
        std::error_code ec;
        std::filesystem::create_directories(outdir, ec);
        if (ec) fail(ErrorKind::io_error, "cannot create '" + outdir.string() + "': " + ec.message());
        std::ostringstream csv;
        write_profile_csv(profile, csv);
        write_text(outdir / "profile.csv", csv.str());
        const nlohmann::json info = {{"id", c.id},
                                     {"rho_minus", c.rho_minus},
                                     {"rho_plus", c.rho_plus},
                                     {"law", c.law().describe()},
                                     {"xi_max", profile.xi_max()},
                                     {"points", profile.size()},
                                     {"residual", profile.residual()}};
        write_text(outdir / "profile.json", info.dump(2) + "\n");
        return exit_ok;
    });
}

}  // namespace qdd
