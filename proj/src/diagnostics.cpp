#include "qdd/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "qdd/error.hpp"

namespace qdd {

double linf_norm(const ScalarField& field) { return field.values().lpNorm<Eigen::Infinity>(); }

double l2_norm(const ScalarField& field) {
    const double scale = linf_norm(field);
    if (scale == 0.0) return 0.0;
    ScalarField unit(field.grid(), field.values() / scale);
    unit.values() = unit.values().cwiseAbs2();
    return scale * std::sqrt(integrate(unit));
}

double lp_norm(const ScalarField& field, double p) {
    if (!(p >= 1.0)) fail(ErrorKind::invalid_argument, "L^p exponent must be >= 1");
    if (std::isinf(p)) return linf_norm(field);
    if (p == 2.0) return l2_norm(field);
    const double scale = linf_norm(field);
    if (scale == 0.0) return 0.0;
    Eigen::VectorXd v = (field.values() / scale).cwiseAbs();
    for (auto& x : v) x = std::pow(x, p);
    return scale * std::pow(integrate(ScalarField(field.grid(), std::move(v))), 1.0 / p);
}

FieldNorms field_norms(const ScalarField& field, int upto_k) {
    if (upto_k < 0 || upto_k > 3) fail(ErrorKind::invalid_argument, "derivative order must be 0..3");
    FieldNorms n;
    n.upto = upto_k;
    n.l2 = l2_norm(field);
    n.linf = linf_norm(field);
    n.derivative_l2[0] = n.l2;
    const double dx = l2_norm(diff(field, 1));
    for (int k = 1; k <= upto_k; ++k) n.derivative_l2[k] = k == 1 ? dx : l2_norm(diff(field, k));
    n.h1 = std::hypot(n.l2, dx);
    return n;
}

DecaySeries::DecaySeries(std::vector<std::string> channels) : names_(std::move(channels)), columns_(names_.size()) {}

bool DecaySeries::has_channel(const std::string& name) const {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
}

void DecaySeries::append(double t, const std::vector<double>& values) {
    if (values.size() != names_.size()) fail(ErrorKind::invalid_argument, "sample width does not match channels");
    if (!std::isfinite(t) || (!times_.empty() && !(t > times_.back())))
        fail(ErrorKind::invalid_argument, "sample times must be strictly increasing");
    for (std::size_t c = 0; c < values.size(); ++c)
        if (!std::isfinite(values[c]) || values[c] < 0.0)
            fail(ErrorKind::invalid_argument, "channel '" + names_[c] + "' must be finite and nonnegative");
    times_.push_back(t);
    for (std::size_t c = 0; c < values.size(); ++c) columns_[c].push_back(values[c]);
}

const std::vector<double>& DecaySeries::channel(const std::string& name) const {
    const auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) fail(ErrorKind::missing_channel, "no channel named '" + name + "'");
    return columns_[static_cast<std::size_t>(it - names_.begin())];
}

double DecaySeries::max(const std::string& name) const {
    const auto& c = channel(name);
    return c.empty() ? 0.0 : *std::max_element(c.begin(), c.end());
}

double DecaySeries::min(const std::string& name) const {
    const auto& c = channel(name);
    return c.empty() ? 0.0 : *std::min_element(c.begin(), c.end());
}

void DecaySeries::write_csv(std::ostream& out) const {
    const auto old_precision = out.precision(17);
    out << 't';
    for (const auto& n : names_) out << ',' << n;
    out << '\n';
    for (std::size_t i = 0; i < times_.size(); ++i) {
        out << times_[i];
        for (const auto& col : columns_) out << ',' << col[i];
        out << '\n';
    }
    out.precision(old_precision);
}

FitWindow default_fit_window(double t_end) { return {std::max(10.0, 0.05 * t_end), 0.8 * t_end}; }

namespace {

RateFit fit_log_linear(const DecaySeries& series, const std::string& channel, FitWindow window, RateKind kind) {
    const auto& values = series.channel(channel);
    const auto& times = series.times();
    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double t = times[i];
        if (t < window.lo || t > window.hi) continue;
        if (!(values[i] > 0.0))
            fail(ErrorKind::nonpositive_value,
                 "channel '" + channel + "' is not positive at t = " + std::to_string(t));
        xs.push_back(kind == RateKind::algebraic ? std::log1p(t) : t);
        ys.push_back(std::log(values[i]));
    }
    if (xs.size() < min_fit_samples)
        fail(ErrorKind::insufficient_samples, "channel '" + channel + "' has " + std::to_string(xs.size()) +
                                                  " samples in the window, need " + std::to_string(min_fit_samples));
    const double count = static_cast<double>(xs.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= count;
    my /= count;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx;
        const double dy = ys[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (!(sxx > 0.0)) fail(ErrorKind::insufficient_samples, "fit window has a single distinct time");
    const double slope = sxy / sxx;
    const double intercept = my - slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double e = ys[i] - (intercept + slope * xs[i]);
        ss_res += e * e;
    }
    // A flat channel is fitted exactly by a zero slope.
    const double tiny = 1e-24 * count * std::max(1.0, my * my);
    const double r2 = syy <= tiny ? 1.0 : std::clamp(1.0 - ss_res / syy, 0.0, 1.0);

    RateFit fit;
    fit.channel = channel;
    fit.kind = kind;
    fit.window = window;
    fit.rate = kind == RateKind::algebraic ? slope : -slope;
    fit.amplitude = std::exp(intercept);
    fit.r2 = r2;
    fit.samples = xs.size();
    return fit;
}

}  // namespace

RateFit fit_algebraic_rate(const DecaySeries& series, const std::string& channel, FitWindow window) {
    return fit_log_linear(series, channel, window, RateKind::algebraic);
}

RateFit fit_exponential_rate(const DecaySeries& series, const std::string& channel, FitWindow window) {
    return fit_log_linear(series, channel, window, RateKind::exponential);
}

nlohmann::json to_json(const RateFit& fit) {
    nlohmann::json j;
    j["channel"] = fit.channel;
    j["kind"] = fit.kind == RateKind::algebraic ? "algebraic" : "exponential";
    j["window"] = {fit.window.lo, fit.window.hi};
    j["exponent_or_beta"] = fit.rate;
    j["C"] = fit.amplitude;
    j["r2"] = fit.r2;
    j["samples"] = fit.samples;
    return j;
}

double weighted_energy(const DecaySeries& series, const std::string& channel, int k, double horizon) {
    const auto& values = series.channel(channel);
    const auto& times = series.times();
    double best = 0.0;
    for (std::size_t i = 0; i < times.size() && times[i] <= horizon; ++i)
        best = std::max(best, std::pow(1.0 + times[i], 0.5 * k) * values[i]);
    return best;
}

double weighted_energy_max(const DecaySeries& series, const std::vector<std::string>& channels, double horizon) {
    double best = 0.0;
    for (std::size_t k = 0; k < channels.size(); ++k)
        best = std::max(best, weighted_energy(series, channels[k], static_cast<int>(k), horizon));
    return best;
}

double mass_defect(const ScalarField& rho, const ScalarField& wave) {
    if (!(rho.grid() == wave.grid())) fail(ErrorKind::invalid_argument, "fields live on different grids");
    return integrate(ScalarField(rho.grid(), rho.values() - wave.values()));
}

std::pair<double, double> mass_defect(const ScalarField& rho_a, const ScalarField& rho_b, const ScalarField& wave) {
    return {mass_defect(rho_a, wave), mass_defect(rho_b, wave)};
}

}  // namespace qdd
