#pragma once

#include <array>
#include <iosfwd>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "qdd/grid.hpp"

namespace qdd {

/// Trapezoid L2 norm, computed on the rescaled field so tiny values do not underflow.
double l2_norm(const ScalarField& field);
double linf_norm(const ScalarField& field);
/// L^p norm over the box; p = infinity gives the sup norm.
double lp_norm(const ScalarField& field, double p);

struct FieldNorms {
    double l2 = 0.0;
    double linf = 0.0;
    double h1 = 0.0;
    /// ||d^k f||_{L2} for k = 0..upto (entry 0 equals l2).
    std::array<double, 4> derivative_l2{};
    int upto = 0;
};

FieldNorms field_norms(const ScalarField& field, int upto_k);

/// Ordered samples of named, nonnegative norm channels.
class DecaySeries {
public:
    DecaySeries() = default;
    explicit DecaySeries(std::vector<std::string> channels);

    const std::vector<std::string>& channel_names() const noexcept { return names_; }
    bool has_channel(const std::string& name) const;

    /// Appends one sample; `values` follows channel_names() order. Enforces increasing times
    /// and finite, nonnegative values.
    void append(double t, const std::vector<double>& values);

    std::size_t size() const noexcept { return times_.size(); }
    bool empty() const noexcept { return times_.empty(); }
    const std::vector<double>& times() const noexcept { return times_; }
    /// Throws missing-channel.
    const std::vector<double>& channel(const std::string& name) const;

    double max(const std::string& name) const;
    double min(const std::string& name) const;

    std::map<std::string, std::string>& metadata() noexcept { return metadata_; }
    const std::map<std::string, std::string>& metadata() const noexcept { return metadata_; }

    /// Header row `t,<channels...>`, '.' decimals, '\n' line endings.
    void write_csv(std::ostream& out) const;

private:
    std::vector<std::string> names_;
    std::vector<double> times_;
    std::vector<std::vector<double>> columns_;
    std::map<std::string, std::string> metadata_;
};

struct FitWindow {
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
};

/// t_lo = max(10, 0.05 t_end), t_hi = 0.8 t_end.
FitWindow default_fit_window(double t_end);

enum class RateKind { algebraic, exponential };

struct RateFit {
    std::string channel;
    RateKind kind = RateKind::algebraic;
    FitWindow window;
    /// Exponent of (1 + t) for algebraic fits, decay rate beta for exponential fits.
    double rate = 0.0;
    double amplitude = 0.0;
    double r2 = 0.0;
    std::size_t samples = 0;
};

inline constexpr std::size_t min_fit_samples = 8;

/// Least-squares line through (log(1 + t), log v).
RateFit fit_algebraic_rate(const DecaySeries& series, const std::string& channel, FitWindow window);
/// Least-squares line through (t, log v); beta = -slope.
RateFit fit_exponential_rate(const DecaySeries& series, const std::string& channel, FitWindow window);

/// {channel, kind, window, exponent_or_beta, C, r2, samples}
nlohmann::json to_json(const RateFit& fit);

/// sup over samples with t <= horizon of (1 + t)^{k/2} * channel.
double weighted_energy(const DecaySeries& series, const std::string& channel, int k,
                       double horizon = std::numeric_limits<double>::infinity());

/// max over k of weighted_energy(channels[k], k): the time-weighted bound quantity.
double weighted_energy_max(const DecaySeries& series, const std::vector<std::string>& channels,
                           double horizon = std::numeric_limits<double>::infinity());

/// integral(rho - wave) dx.
double mass_defect(const ScalarField& rho, const ScalarField& wave);
std::pair<double, double> mass_defect(const ScalarField& rho_a, const ScalarField& rho_b, const ScalarField& wave);

}  // namespace qdd
