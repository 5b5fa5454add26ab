#include "qdd/selfsimilar.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>

#include "qdd/banded.hpp"
#include "qdd/diagnostics.hpp"
#include "qdd/error.hpp"

namespace qdd {

namespace {

constexpr int max_newton_steps = 50;
constexpr int max_damping_halvings = 10;

// Discrete ODE multiplied through by dxi^2; Dirichlet rows hold the boundary mismatch.
Eigen::VectorXd profile_residual(const PressureLaw& law, const Grid1D& grid, const Eigen::VectorXd& w,
                                 double rho_minus, double rho_plus) {
    const Index m = grid.size();
    const double dxi = grid.spacing();
    Eigen::VectorXd p(m);
    for (Index i = 0; i < m; ++i) p[i] = law.p(w[i]);
    Eigen::VectorXd r(m);
    r[0] = w[0] - rho_minus;
    r[m - 1] = w[m - 1] - rho_plus;
    for (Index i = 1; i < m - 1; ++i)
        r[i] = p[i + 1] - 2.0 * p[i] + p[i - 1] + 0.25 * dxi * grid.x(i) * (w[i + 1] - w[i - 1]);
    return r;
}

BandedMatrix<double> profile_jacobian(const PressureLaw& law, const Grid1D& grid, const Eigen::VectorXd& w) {
    const Index m = grid.size();
    const double dxi = grid.spacing();
    BandedMatrix<double> jac(m, 1, 1);
    jac.ref(0, 0) = 1.0;
    jac.ref(m - 1, m - 1) = 1.0;
    for (Index i = 1; i < m - 1; ++i) {
        const double drift = 0.25 * dxi * grid.x(i);
        jac.ref(i, i - 1) = law.dp(w[i - 1]) - drift;
        jac.ref(i, i) = -2.0 * law.dp(w[i]);
        jac.ref(i, i + 1) = law.dp(w[i + 1]) + drift;
    }
    return jac;
}

// Weights of the 4-point Lagrange interpolant through nodes -1, 0, 1, 2 at offset s in [0, 1].
std::array<double, 4> cubic_weights(double s) {
    return {-s * (s - 1.0) * (s - 2.0) / 6.0, (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0,
            -(s + 1.0) * s * (s - 2.0) / 2.0, (s + 1.0) * s * (s - 1.0) / 6.0};
}

}  // namespace

SelfSimilarProfile::SelfSimilarProfile(Grid1D xi_grid, Eigen::VectorXd w, double rho_minus, double rho_plus)
    : grid_(xi_grid), rho_minus_(rho_minus), rho_plus_(rho_plus) {
    if (w.size() != grid_.size()) fail(ErrorKind::invalid_argument, "profile table length mismatch");
    if (!(w.minCoeff() > 0.0)) fail(ErrorKind::positivity_violation, "profile must be positive");
    ScalarField wf(grid_, w, FarField<double>{rho_minus, rho_plus});
    w_[0] = w;
    for (int k = 1; k <= 3; ++k) w_[k] = diff(wf, k).values();
    ScalarField sf(grid_, w.cwiseSqrt(), FarField<double>{std::sqrt(rho_minus), std::sqrt(rho_plus)});
    sqrt_w_[0] = sf.values();
    for (int k = 1; k <= 3; ++k) sqrt_w_[k] = diff(sf, k).values();
}

const Eigen::VectorXd& SelfSimilarProfile::table(int k) const {
    if (k < 0 || k > 3) fail(ErrorKind::invalid_argument, "profile derivative order must be 0..3");
    return w_[k];
}

const Eigen::VectorXd& SelfSimilarProfile::sqrt_table(int k) const {
    if (k < 0 || k > 3) fail(ErrorKind::invalid_argument, "profile derivative order must be 0..3");
    return sqrt_w_[k];
}

double SelfSimilarProfile::interpolate(const Eigen::VectorXd& tab, int k, double xi, double left,
                                       double right) const {
    const double xmax = grid_.half_width();
    if (xi <= -xmax) return k == 0 ? left : 0.0;
    if (xi >= xmax) return k == 0 ? right : 0.0;
    const Index m = grid_.size();
    const double pos = (xi + xmax) / grid_.spacing();
    Index i = static_cast<Index>(std::floor(pos));
    i = std::clamp<Index>(i, 1, m - 3);
    const auto wts = cubic_weights(pos - static_cast<double>(i));
    return wts[0] * tab[i - 1] + wts[1] * tab[i] + wts[2] * tab[i + 1] + wts[3] * tab[i + 2];
}

double SelfSimilarProfile::value(int k, double xi) const { return interpolate(table(k), k, xi, rho_minus_, rho_plus_); }

double SelfSimilarProfile::sqrt_value(int k, double xi) const {
    return interpolate(sqrt_table(k), k, xi, std::sqrt(rho_minus_), std::sqrt(rho_plus_));
}

double SelfSimilarProfile::residual() const { return residual_; }

SelfSimilarProfile solve_profile(const PressureLaw& law, double rho_minus, double rho_plus, double xi_max,
                                 Index points) {
    if (!(rho_minus > 0.0) || !(rho_plus > 0.0))
        fail(ErrorKind::invalid_argument, "end states must be positive");
    if (!(xi_max >= 10.0)) fail(ErrorKind::invalid_argument, "similarity half-width must be >= 10");
    if (points < 201) fail(ErrorKind::invalid_argument, "profile needs at least 201 points");

    const Grid1D grid(xi_max, points);
    const Index m = points;
    const double rho_floor = 1e-8 * std::min(rho_minus, rho_plus);
    const double tol = 1e-12 * std::max(rho_minus, rho_plus);

    Eigen::VectorXd w(m);
    for (Index i = 0; i < m; ++i)
        w[i] = rho_minus + (rho_plus - rho_minus) * static_cast<double>(i) / static_cast<double>(m - 1);

    auto clip = [&](Eigen::VectorXd& v) {
        bool clipped = false;
        for (Index i = 0; i < m; ++i)
            if (v[i] < rho_floor) {
                v[i] = rho_floor;
                clipped = true;
            }
        return clipped;
    };

    Eigen::VectorXd r = profile_residual(law, grid, w, rho_minus, rho_plus);
    double res = r.lpNorm<Eigen::Infinity>();
    bool clipped = false;
    int step = 0;
    while (res > tol) {
        if (++step > max_newton_steps)
            fail(ErrorKind::no_convergence, "similarity profile Newton did not converge in 50 steps (residual " +
                                                std::to_string(res) + ")");
        const Eigen::VectorXd delta = band_solve(profile_jacobian(law, grid, w), Eigen::VectorXd(-r));
        double lambda = 1.0;
        Eigen::VectorXd trial;
        double trial_res = 0.0;
        for (int halving = 0;; ++halving) {
            trial = w + lambda * delta;
            clipped = clip(trial);
            trial_res = profile_residual(law, grid, trial, rho_minus, rho_plus).lpNorm<Eigen::Infinity>();
            if (trial_res < res || halving == max_damping_halvings) break;
            lambda *= 0.5;
        }
        w = std::move(trial);
        r = profile_residual(law, grid, w, rho_minus, rho_plus);
        res = trial_res;
    }
    if (clipped) fail(ErrorKind::positivity_violation, "profile iterate clipped at the density floor");

    SelfSimilarProfile profile(grid, std::move(w), rho_minus, rho_plus);
    profile.residual_ = res;
    return profile;
}

ScalarField eval_wave(const SelfSimilarProfile& profile, double x0, const Grid1D& grid, double t, int k) {
    if (!(t >= 0.0)) fail(ErrorKind::invalid_argument, "wave time must be nonnegative");
    if (k < 0 || k > 3) fail(ErrorKind::invalid_argument, "wave derivative order must be 0..3");
    const double s = std::sqrt(t + 1.0);
    const double scale = std::pow(s, -k);
    Eigen::VectorXd v(grid.size());
    for (Index j = 0; j < grid.size(); ++j) v[j] = scale * profile.value(k, (grid.x(j) + x0) / s);
    const FarField<double> far = k == 0 ? FarField<double>{profile.rho_minus(), profile.rho_plus()} : FarField<double>{0, 0};
    return ScalarField(grid, std::move(v), far);
}

ScalarField eval_sqrt_wave(const SelfSimilarProfile& profile, double x0, const Grid1D& grid, double t, int k) {
    if (!(t >= 0.0)) fail(ErrorKind::invalid_argument, "wave time must be nonnegative");
    if (k < 0 || k > 3) fail(ErrorKind::invalid_argument, "wave derivative order must be 0..3");
    const double s = std::sqrt(t + 1.0);
    const double scale = std::pow(s, -k);
    Eigen::VectorXd v(grid.size());
    for (Index j = 0; j < grid.size(); ++j) v[j] = scale * profile.sqrt_value(k, (grid.x(j) + x0) / s);
    const FarField<double> far = k == 0 ? FarField<double>{std::sqrt(profile.rho_minus()), std::sqrt(profile.rho_plus())}
                                        : FarField<double>{0, 0};
    return ScalarField(grid, std::move(v), far);
}

ScalarField wave_time_derivative(const SelfSimilarProfile& profile, double x0, const Grid1D& grid, double t) {
    const double s = std::sqrt(t + 1.0);
    Eigen::VectorXd v(grid.size());
    for (Index j = 0; j < grid.size(); ++j) {
        const double xi = (grid.x(j) + x0) / s;
        v[j] = -0.5 * xi * profile.value(1, xi) / (t + 1.0);
    }
    return ScalarField(grid, std::move(v), FarField<double>{0, 0});
}

double compute_shift(const ScalarField& rho0, const SelfSimilarProfile& profile) {
    const double jump = profile.rho_plus() - profile.rho_minus();
    if (std::abs(jump) < 1e-12)
        fail(ErrorKind::degenerate_shift, "end states coincide; the shift is undetermined (set x0 = 0)");
    const Grid1D& grid = rho0.grid();
    auto defect = [&](double x0) { return integrate(rho0 - eval_wave(profile, x0, grid, 0.0, 0)); };

    const double f0 = defect(0.0);
    double x0 = f0 / jump;
    double f = defect(x0);
    const double tol = 1e-10 * (1.0 + std::abs(f0));
    // On a finite box the slope is -(W(L + x0) - W(-L + x0)) rather than exactly -jump.
    for (int iter = 0; iter < 3 && std::abs(f) > tol; ++iter) {
        const double L = grid.half_width();
        const double slope = -(profile.value(0, L + x0) - profile.value(0, -L + x0));
        x0 -= f / slope;
        f = defect(x0);
    }
    if (!(std::abs(f) <= tol))
        fail(ErrorKind::no_convergence, "shift equation residual " + std::to_string(f) + " above tolerance");
    return x0;
}

ScalingReport verify_profile_scaling(const SelfSimilarProfile& profile, double x0, const Grid1D& grid, double p,
                                     int order, const std::vector<double>& times) {
    if (!(p >= 1.0)) fail(ErrorKind::invalid_argument, "L^p exponent must be >= 1");
    if (order < 0 || order > 3) fail(ErrorKind::invalid_argument, "derivative order must be 0..3");
    ScalingReport report;
    report.p = p;
    report.order = order;
    report.truncated = order == 0 && std::isfinite(p);
    const double delta = profile.strength();
    const double inv_p = std::isfinite(p) ? 1.0 / p : 0.0;
    for (double t : times) {
        ScalingRow row{};
        row.t = t;
        row.norm_w = lp_norm(eval_wave(profile, x0, grid, t, order), p);
        row.norm_sqrt_w = lp_norm(eval_sqrt_wave(profile, x0, grid, t, order), p);
        const double bound = delta * std::pow(1.0 + t, -0.5 * order + 0.5 * inv_p);
        row.ratio_w = bound > 0.0 ? row.norm_w / bound : 0.0;
        row.ratio_sqrt_w = bound > 0.0 ? row.norm_sqrt_w / bound : 0.0;
        report.max_ratio_w = std::max(report.max_ratio_w, row.ratio_w);
        report.max_ratio_sqrt_w = std::max(report.max_ratio_sqrt_w, row.ratio_sqrt_w);
        report.rows.push_back(row);
    }
    return report;
}

void write_profile_csv(const SelfSimilarProfile& profile, std::ostream& out) {
    const auto old_precision = out.precision(17);
    out << "xi,W,dW,d2W,d3W,sqrtW\n";
    const auto& g = profile.xi_grid();
    for (Index i = 0; i < profile.size(); ++i) {
        out << g.x(i) << ',' << profile.table(0)[i] << ',' << profile.table(1)[i] << ',' << profile.table(2)[i] << ','
            << profile.table(3)[i] << ',' << profile.sqrt_table(0)[i] << '\n';
    }
    out.precision(old_precision);
}

}  // namespace qdd
