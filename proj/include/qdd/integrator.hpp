#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "qdd/banded.hpp"
#include "qdd/error.hpp"

namespace qdd {

enum class TimeScheme {
    /// Backward Euler; the two half steps of the step-doubling pair are kept.
    euler,
    /// Backward Euler with step doubling and Richardson extrapolation (2 * half - full).
    euler_extrapolated,
    /// Variable-step BDF2 with a backward-Euler first step.
    bdf2,
};

enum class JacobianMode { analytic, finite_difference };

std::string to_string(TimeScheme scheme);
std::string to_string(JacobianMode mode);
TimeScheme time_scheme_from_string(const std::string& name);
JacobianMode jacobian_mode_from_string(const std::string& name);

struct StepControls {
    double error_target = 1e-6;
    double newton_tol = 1e-10;
    int newton_max_iter = 25;
    /// Fraction of min(rho_-, rho_+) below which an iterate is rejected.
    double positivity_floor = 1e-6;
    double dt_initial = 1e-3;
    /// dt_max = dt_max_coeff * sqrt(1 + t).
    double dt_max_coeff = 0.1;
    double growth = 1.5;
    int max_halvings = 20;
    /// Step-error target relative to the size of exponentially decaying components (bipolar charge).
    double relative_target = 1e-2;
    TimeScheme scheme = TimeScheme::euler_extrapolated;
    JacobianMode jacobian = JacobianMode::analytic;
};

/// Output schedules must be nonempty and strictly increasing; the first entry is the start time.
inline void validate_outputs(const std::vector<double>& outputs) {
    if (outputs.empty()) fail(ErrorKind::invalid_argument, "at least one output time is required");
    for (std::size_t i = 1; i < outputs.size(); ++i)
        if (!(outputs[i] > outputs[i - 1])) fail(ErrorKind::invalid_argument, "output times must be strictly increasing");
}

struct StepStats {
    long accepted = 0;
    long rejected = 0;
    long newton_iterations = 0;
    double last_dt = 0.0;
};

/// Banded Jacobian by finite differences, perturbing every (kl+ku+1)-th column together.
template <class Residual>
BandedMatrix<double> fd_jacobian(Residual&& residual, const Eigen::VectorXd& y, Index kl, Index ku) {
    const Index n = y.size();
    const Eigen::VectorXd r0 = residual(y);
    BandedMatrix<double> jac(n, kl, ku);
    const Index stride = kl + ku + 1;
    Eigen::VectorXd yp = y;
    Eigen::VectorXd steps(n);
    for (Index c = 0; c < stride && c < n; ++c) {
        yp = y;
        for (Index j = c; j < n; j += stride) {
            steps[j] = 1e-7 * std::max(1.0, std::abs(y[j]));
            yp[j] += steps[j];
        }
        const Eigen::VectorXd r1 = residual(yp);
        for (Index j = c; j < n; j += stride)
            for (Index i = std::max<Index>(0, j - ku); i <= std::min<Index>(n - 1, j + kl); ++i)
                jac.ref(i, j) = (r1[i] - r0[i]) / steps[j];
    }
    return jac;
}

/// Solves residual(y; base, gamma_dt) = 0 for y. Returns nullopt when Newton fails to converge,
/// the Jacobian is singular, or an iterate leaves the admissible set.
///
/// System requirements:
///   Eigen::VectorXd residual(const Eigen::VectorXd& y, const Eigen::VectorXd& base, double gamma_dt) const;
///   BandedMatrix<double> jacobian(const Eigen::VectorXd& y, double gamma_dt) const;
///   Index lower_bandwidth() const; Index upper_bandwidth() const;
///   bool admissible(const Eigen::VectorXd& y) const;
///   bool converged(const Eigen::VectorXd& delta, const Eigen::VectorXd& y, double tol) const;
///   void normalize(Eigen::VectorXd& y) const;
///   void prepare(double t);
///   double error_norm(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;
template <class System>
std::optional<Eigen::VectorXd> newton_solve(const System& sys, Eigen::VectorXd y, const Eigen::VectorXd& base,
                                            double gamma_dt, const StepControls& controls, long* iterations = nullptr) {
    for (int iter = 0; iter < controls.newton_max_iter; ++iter) {
        const Eigen::VectorXd r = sys.residual(y, base, gamma_dt);
        if (!r.allFinite()) return std::nullopt;
        Eigen::VectorXd delta;
        try {
            if (controls.jacobian == JacobianMode::analytic) {
                delta = band_solve(sys.jacobian(y, gamma_dt), Eigen::VectorXd(-r));
            } else {
                auto res = [&](const Eigen::VectorXd& v) { return sys.residual(v, base, gamma_dt); };
                delta = band_solve(fd_jacobian(res, y, sys.lower_bandwidth(), sys.upper_bandwidth()),
                                   Eigen::VectorXd(-r));
            }
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::singular_matrix || e.kind() == ErrorKind::domain_error ||
                e.kind() == ErrorKind::positivity_violation)
                return std::nullopt;
            throw;
        }
        if (iterations) ++*iterations;
        y += delta;
        sys.normalize(y);
        if (!y.allFinite() || !sys.admissible(y)) return std::nullopt;
        if (sys.converged(delta, y, controls.newton_tol)) return y;
    }
    return std::nullopt;
}

/// One backward-Euler step of size dt; on failure the interval is split into two halves,
/// recursively, at most controls.max_halvings deep.
template <class System>
std::optional<Eigen::VectorXd> solve_with_halving(const System& sys, const Eigen::VectorXd& y, double dt,
                                                  const StepControls& controls, int depth = 0) {
    if (auto next = newton_solve(sys, y, y, dt, controls)) return next;
    if (depth >= controls.max_halvings) return std::nullopt;
    auto mid = solve_with_halving(sys, y, 0.5 * dt, controls, depth + 1);
    if (!mid) return std::nullopt;
    return solve_with_halving(sys, *mid, 0.5 * dt, controls, depth + 1);
}

/// Adaptive implicit integration from t0 through every time in `outputs` (ascending, >= t0).
/// `observe(t, y, dt)` is called at each output time; outputs equal to t0 are observed first.
template <class System, class Observer>
StepStats integrate_adaptive(System& sys, Eigen::VectorXd& y, double t0, const std::vector<double>& outputs,
                             const StepControls& c, Observer&& observe) {
    StepStats stats;
    double t = t0;
    double dt = c.dt_initial;
    int failures = 0;
    std::optional<Eigen::VectorXd> previous;
    double previous_dt = 0.0;

    auto solve = [&](const Eigen::VectorXd& guess, const Eigen::VectorXd& base, double t_new, double gamma_dt) {
        sys.prepare(t_new);
        return newton_solve(sys, guess, base, gamma_dt, c, &stats.newton_iterations);
    };

    for (double target : outputs) {
        if (target < t) fail(ErrorKind::invalid_argument, "output times must be ascending and >= t0");
        while (t < target) {
            const double dt_max = c.dt_max_coeff * std::sqrt(1.0 + t);
            double h = std::min(dt, dt_max);
            bool clipped = false;
            if (t + h >= target || target - (t + h) < 1e-9 * h) {
                h = target - t;
                clipped = true;
            }

            std::optional<Eigen::VectorXd> next;
            double est = 0.0;
            bool error_reject = false;
            if (c.scheme == TimeScheme::bdf2 && previous) {
                const double w = h / previous_dt;
                const double gamma = (1.0 + w) / (1.0 + 2.0 * w);
                const Eigen::VectorXd base = ((1.0 + w) * (1.0 + w) * y - w * w * *previous) / (1.0 + 2.0 * w);
                auto be = solve(y, y, t + h, h);
                if (be) next = solve(*be, base, t + h, gamma * h);
                if (next) est = sys.error_norm(*next, *be);
            } else {
                auto full = solve(y, y, t + h, h);
                std::optional<Eigen::VectorXd> half;
                if (full) half = solve(y, y, t + 0.5 * h, 0.5 * h);
                if (half) half = solve(*half, *half, t + h, 0.5 * h);
                if (half) {
                    est = sys.error_norm(*full, *half);
                    if (c.scheme == TimeScheme::euler_extrapolated) {
                        Eigen::VectorXd ex = 2.0 * *half - *full;
                        sys.normalize(ex);
                        if (sys.admissible(ex)) next = std::move(ex);
                    } else {
                        next = std::move(half);
                    }
                }
            }
            if (next && est > c.error_target) {
                next.reset();
                error_reject = true;
            }

            if (!next) {
                ++stats.rejected;
                if (++failures > c.max_halvings)
                    throw StepFailure(t, "no admissible step after " + std::to_string(c.max_halvings) + " reductions");
                dt = error_reject ? h * std::clamp(0.9 * std::sqrt(c.error_target / est), 0.2, 0.5) : 0.5 * h;
                continue;
            }

            failures = 0;
            ++stats.accepted;
            stats.last_dt = h;
            previous = y;
            previous_dt = h;
            y = std::move(*next);
            t = clipped ? target : t + h;
            const double factor = est > 0.0 ? std::min(c.growth, 0.9 * std::sqrt(c.error_target / est)) : c.growth;
            if (!clipped)
                dt = h * factor;
            else if (factor < 1.0)
                dt = std::min(dt, h * factor);
        }
        observe(target, static_cast<const Eigen::VectorXd&>(y), stats.last_dt);
    }
    return stats;
}

}  // namespace qdd
