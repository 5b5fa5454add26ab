#pragma once

#include <cmath>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "qdd/grid.hpp"
#include "qdd/pressure.hpp"

namespace qdd {

/// Tabulated self-similar wave W(xi), xi = x / sqrt(t + 1), of rho_t = p(rho)_xx.
///
/// Substituting rho(x, t) = W(x / sqrt(t + 1)) gives rho_t = -(xi / 2) W'(xi) / (t + 1) and
/// p(rho)_xx = p(W)''(xi) / (t + 1), so W solves the two-point problem
///
///     p(W)'' + (xi / 2) W' = 0,   W(-inf) = rho_minus,   W(+inf) = rho_plus,
///
/// which is posed here on [-xi_max, xi_max] with Dirichlet ends. See docs/similarity_profile.md.
class SelfSimilarProfile {
public:
    SelfSimilarProfile(Grid1D xi_grid, Eigen::VectorXd w, double rho_minus, double rho_plus);

    const Grid1D& xi_grid() const noexcept { return grid_; }
    double xi_max() const noexcept { return grid_.half_width(); }
    Index size() const noexcept { return grid_.size(); }

    double rho_minus() const noexcept { return rho_minus_; }
    double rho_plus() const noexcept { return rho_plus_; }
    /// Wave strength |rho_plus - rho_minus|.
    double strength() const noexcept { return std::abs(rho_plus_ - rho_minus_); }

    /// Tabulated k-th xi-derivative of W (k = 0..3).
    const Eigen::VectorXd& table(int k) const;
    /// Tabulated k-th xi-derivative of sqrt(W) (k = 0..3).
    const Eigen::VectorXd& sqrt_table(int k) const;

    /// Cubic interpolation of W^(k) at xi; clamped to the end states outside [-xi_max, xi_max].
    double value(int k, double xi) const;
    double sqrt_value(int k, double xi) const;

    /// Max |discrete ODE residual| (the form multiplied through by dxi^2).
    double residual() const;

private:
    double interpolate(const Eigen::VectorXd& table, int k, double xi, double left, double right) const;

    Grid1D grid_;
    double rho_minus_;
    double rho_plus_;
    Eigen::VectorXd w_[4];
    Eigen::VectorXd sqrt_w_[4];
    double residual_ = 0.0;

    friend SelfSimilarProfile solve_profile(const PressureLaw&, double, double, double, Index);
};

struct ProfileOptions {
    double xi_max = 15.0;
    Index points = 3001;
};

/// Newton solve of p(W)'' + (xi/2) W' = 0 with W(-xi_max) = rho_minus, W(xi_max) = rho_plus.
/// Throws no-convergence after 50 Newton steps and positivity-violation if the iterate stays clipped.
SelfSimilarProfile solve_profile(const PressureLaw& law, double rho_minus, double rho_plus, double xi_max = 15.0,
                                 Index points = 3001);

/// Translation x0 with integral(rho0(x) - W(x + x0)) dx = 0 over the grid.
double compute_shift(const ScalarField& rho0, const SelfSimilarProfile& profile);

/// d^k/dx^k W((x + x0) / sqrt(t + 1)) on the grid nodes, k = 0..3.
ScalarField eval_wave(const SelfSimilarProfile& profile, double x0, const Grid1D& grid, double t, int k);

/// Same as eval_wave for sqrt(W).
ScalarField eval_sqrt_wave(const SelfSimilarProfile& profile, double x0, const Grid1D& grid, double t, int k);

/// Analytic d/dt W((x + x0) / sqrt(t + 1)) = -(xi / 2) W'(xi) / (t + 1).
ScalarField wave_time_derivative(const SelfSimilarProfile& profile, double x0, const Grid1D& grid, double t);

struct ScalingRow {
    double t;
    double norm_w;
    double norm_sqrt_w;
    double ratio_w;
    double ratio_sqrt_w;
};

struct ScalingReport {
    double p;
    int order;
    std::vector<ScalingRow> rows;
    double max_ratio_w = 0.0;
    double max_ratio_sqrt_w = 0.0;
    /// Set for order 0 with finite p: the norm exists only on the truncated box.
    bool truncated = false;
};

/// Ratios ||d^j W(., t)||_{L^p} / [delta (1 + t)^{-j/2 + 1/(2p)}] over `times`, and the same for sqrt(W).
/// Use p = infinity for the sup norm.
ScalingReport verify_profile_scaling(const SelfSimilarProfile& profile, double x0, const Grid1D& grid, double p,
                                     int order, const std::vector<double>& times);

/// CSV columns: xi,W,dW,d2W,d3W,sqrtW.
void write_profile_csv(const SelfSimilarProfile& profile, std::ostream& out);

}  // namespace qdd
