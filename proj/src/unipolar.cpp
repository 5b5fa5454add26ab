#include "qdd/unipolar.hpp"

#include <algorithm>
#include <cmath>

#include "qdd/error.hpp"

namespace qdd {

namespace {

void require_positive(const ScalarField& rho, const char* what) {
    if (!(rho.values().minCoeff() > 0.0))
        fail(ErrorKind::positivity_violation, std::string(what) + " must be strictly positive");
}

ScalarField with_far_field(const Grid1D& grid, Eigen::VectorXd v, double left, double right) {
    return ScalarField(grid, std::move(v), FarField<double>{left, right});
}

// Density form. Residual y - base - gamma_dt * D2 Phi(y), where
// Phi = p(rho) - (eps^2/2) D2 rho + (eps^2/2) (D1 rho)^2 / rho is the total flux potential.
class UnipolarSystem {
public:
    UnipolarSystem(const PressureLaw& law, double epsilon, const Grid1D& grid, double rho_minus, double rho_plus,
                   double floor)
        : law_(law), eps2_(epsilon * epsilon), h_(grid.spacing()), left_(rho_minus), right_(rho_plus),
          floor_(floor) {}

    Index lower_bandwidth() const { return 2; }
    Index upper_bandwidth() const { return 2; }
    void prepare(double) {}
    void normalize(Eigen::VectorXd&) const {}

    bool admissible(const Eigen::VectorXd& y) const { return y.minCoeff() > floor_; }
    bool converged(const Eigen::VectorXd& d, const Eigen::VectorXd&, double tol) const {
        return d.lpNorm<Eigen::Infinity>() <= tol;
    }
    double error_norm(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
        return (a - b).lpNorm<Eigen::Infinity>();
    }

    Eigen::VectorXd rhs(const Eigen::VectorXd& y) const {
        const Index n = y.size();
        const Eigen::VectorXd phi = potential(y);
        const double c = 1.0 / (h_ * h_);
        const double pl = law_.p(left_);
        const double pr = law_.p(right_);
        Eigen::VectorXd out(n);
        for (Index j = 0; j < n; ++j) {
            const double lo = j > 0 ? phi[j - 1] : pl;
            const double hi = j + 1 < n ? phi[j + 1] : pr;
            out[j] = (hi - 2.0 * phi[j] + lo) * c;
        }
        return out;
    }

    Eigen::VectorXd residual(const Eigen::VectorXd& y, const Eigen::VectorXd& base, double gdt) const {
        return y - base - gdt * rhs(y);
    }

    BandedMatrix<double> jacobian(const Eigen::VectorXd& y, double gdt) const {
        const Index n = y.size();
        // dPhi_j / d rho_{j-1}, d rho_j, d rho_{j+1}
        Eigen::MatrixXd dphi(n, 3);
        const double a = eps2_ / (h_ * h_);
        for (Index j = 0; j < n; ++j) {
            const double lo = j > 0 ? y[j - 1] : left_;
            const double hi = j + 1 < n ? y[j + 1] : right_;
            const double g = (hi - lo) / (2.0 * h_);
            const double r = y[j];
            const double s = eps2_ * g / (2.0 * h_ * r);
            dphi(j, 0) = -0.5 * a - s;
            dphi(j, 1) = law_.dp(r) + a - 0.5 * eps2_ * g * g / (r * r);
            dphi(j, 2) = -0.5 * a + s;
        }
        BandedMatrix<double> jac(n, 2, 2);
        const double c = gdt / (h_ * h_);
        for (Index i = 0; i < n; ++i) {
            jac.add(i, i, 1.0);
            for (Index di = -1; di <= 1; ++di) {
                const Index j = i + di;
                if (j < 0 || j >= n) continue;
                const double w = di == 0 ? -2.0 : 1.0;
                for (Index dk = -1; dk <= 1; ++dk) {
                    const Index k = j + dk;
                    if (k < 0 || k >= n) continue;
                    jac.add(i, k, -c * w * dphi(j, dk + 1));
                }
            }
        }
        return jac;
    }

private:
    Eigen::VectorXd potential(const Eigen::VectorXd& y) const {
        const Index n = y.size();
        Eigen::VectorXd phi(n);
        const double inv_h2 = 1.0 / (h_ * h_);
        for (Index j = 0; j < n; ++j) {
            const double lo = j > 0 ? y[j - 1] : left_;
            const double hi = j + 1 < n ? y[j + 1] : right_;
            const double g = (hi - lo) / (2.0 * h_);
            const double d2 = (hi - 2.0 * y[j] + lo) * inv_h2;
            phi[j] = law_.p(y[j]) - 0.5 * eps2_ * d2 + 0.5 * eps2_ * g * g / y[j];
        }
        return phi;
    }

    PressureLaw law_;
    double eps2_;
    double h_;
    double left_;
    double right_;
    double floor_;
};

// z form, with the wave frozen at the time passed to prepare().
class PerturbationSystem {
public:
    PerturbationSystem(const PressureLaw& law, double epsilon, const Grid1D& grid, const SelfSimilarProfile& profile,
                       double x0, double floor)
        : law_(law), eps2_(epsilon * epsilon), grid_(grid), h_(grid.spacing()), profile_(profile), x0_(x0),
          floor_(floor) {}

    Index lower_bandwidth() const { return 2; }
    Index upper_bandwidth() const { return 2; }
    void normalize(Eigen::VectorXd&) const {}

    void prepare(double t) {
        if (prepared_ && t == t_) return;
        prepared_ = true;
        t_ = t;
        const Index n = grid_.size();
        w_ = eval_wave(profile_, x0_, grid_, t, 0).values();
        wx_ = eval_wave(profile_, x0_, grid_, t, 1).values();
        wxx_ = eval_wave(profile_, x0_, grid_, t, 2).values();
        pw_.resize(n);
        dpw_.resize(n);
        for (Index j = 0; j < n; ++j) {
            const auto v = law_.eval(w_[j]);
            pw_[j] = v.p;
            dpw_[j] = v.dp;
        }
        // face coefficients a_{j+1/2}, j = -1..n-1, stored at index j+1
        face_.resize(n + 1);
        face_[0] = 0.5 * (law_.dp(profile_.rho_minus()) + dpw_[0]);
        for (Index j = 0; j + 1 < n; ++j) face_[j + 1] = 0.5 * (dpw_[j] + dpw_[j + 1]);
        face_[n] = 0.5 * (dpw_[n - 1] + law_.dp(profile_.rho_plus()));
    }

    bool admissible(const Eigen::VectorXd& y) const {
        const Index n = y.size();
        for (Index j = 0; j < n; ++j)
            if (!(w_[j] + d1(y, j) > floor_)) return false;
        return true;
    }
    bool converged(const Eigen::VectorXd& d, const Eigen::VectorXd&, double tol) const {
        return d.lpNorm<Eigen::Infinity>() <= tol;
    }
    double error_norm(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
        const Eigen::VectorXd d = a - b;
        double slope = 0.0;
        for (Index j = 0; j < d.size(); ++j) slope = std::max(slope, std::abs(d1(d, j)));
        return std::max(d.lpNorm<Eigen::Infinity>(), slope);
    }

    Eigen::VectorXd rhs(const Eigen::VectorXd& y) const {
        const Index n = y.size();
        Eigen::VectorXd f(n);
        for (Index j = 0; j < n; ++j) {
            const double u = d1(y, j);
            const double v = d2(y, j);
            const double s = w_[j] + u;
            if (!(s > 0.0)) fail(ErrorKind::positivity_violation, "W + z_x must be strictly positive");
            const double q = wx_[j] + v;
            f[j] = 0.5 * eps2_ * (q * q / s - wxx_[j]) + law_.p(s) - dpw_[j] * u - pw_[j];
        }
        const double inv_h2 = 1.0 / (h_ * h_);
        const double c4 = 0.5 * eps2_ * inv_h2 * inv_h2;
        Eigen::VectorXd out(n);
        for (Index j = 0; j < n; ++j) {
            const double zm2 = at(y, j - 2), zm1 = at(y, j - 1), z0 = y[j], zp1 = at(y, j + 1), zp2 = at(y, j + 2);
            const double diffusion = (face_[j + 1] * (zp1 - z0) - face_[j] * (z0 - zm1)) * inv_h2;
            const double fourth = c4 * (zp2 - 4.0 * zp1 + 6.0 * z0 - 4.0 * zm1 + zm2);
            const double fl = j > 0 ? f[j - 1] : 0.0;
            const double fr = j + 1 < n ? f[j + 1] : 0.0;
            out[j] = diffusion - fourth + (fr - fl) / (2.0 * h_);
        }
        return out;
    }

    Eigen::VectorXd residual(const Eigen::VectorXd& y, const Eigen::VectorXd& base, double gdt) const {
        return y - base - gdt * rhs(y);
    }

    BandedMatrix<double> jacobian(const Eigen::VectorXd& y, double gdt) const {
        const Index n = y.size();
        // df_j / dz_{j-1}, dz_j, dz_{j+1}
        Eigen::MatrixXd df(n, 3);
        const double inv_h2 = 1.0 / (h_ * h_);
        for (Index j = 0; j < n; ++j) {
            const double u = d1(y, j);
            const double v = d2(y, j);
            const double s = w_[j] + u;
            const double q = wx_[j] + v;
            const double fu = -0.5 * eps2_ * q * q / (s * s) + law_.dp(s) - dpw_[j];
            const double fv = eps2_ * q / s;
            df(j, 0) = -fu / (2.0 * h_) + fv * inv_h2;
            df(j, 1) = -2.0 * fv * inv_h2;
            df(j, 2) = fu / (2.0 * h_) + fv * inv_h2;
        }
        const double c4 = 0.5 * eps2_ * inv_h2 * inv_h2;
        static constexpr double stencil4[5] = {1.0, -4.0, 6.0, -4.0, 1.0};
        BandedMatrix<double> jac(n, 2, 2);
        for (Index i = 0; i < n; ++i) {
            jac.add(i, i, 1.0);
            // linear part
            if (i > 0) jac.add(i, i - 1, -gdt * face_[i] * inv_h2);
            jac.add(i, i, gdt * (face_[i + 1] + face_[i]) * inv_h2);
            if (i + 1 < n) jac.add(i, i + 1, -gdt * face_[i + 1] * inv_h2);
            for (Index d = -2; d <= 2; ++d)
                if (i + d >= 0 && i + d < n) jac.add(i, i + d, gdt * c4 * stencil4[d + 2]);
            // flux part: (f_{i+1} - f_{i-1}) / (2h)
            for (Index side : {Index(-1), Index(1)}) {
                const Index j = i + side;
                if (j < 0 || j >= n) continue;
                const double w = static_cast<double>(side) / (2.0 * h_);
                for (Index dk = -1; dk <= 1; ++dk) {
                    const Index k = j + dk;
                    if (k < 0 || k >= n) continue;
                    jac.add(i, k, -gdt * w * df(j, dk + 1));
                }
            }
        }
        return jac;
    }

    const Eigen::VectorXd& wave() const { return w_; }

private:
    static double at(const Eigen::VectorXd& y, Index j) { return j < 0 || j >= y.size() ? 0.0 : y[j]; }
    double d1(const Eigen::VectorXd& y, Index j) const { return (at(y, j + 1) - at(y, j - 1)) / (2.0 * h_); }
    double d2(const Eigen::VectorXd& y, Index j) const {
        return (at(y, j + 1) - 2.0 * y[j] + at(y, j - 1)) / (h_ * h_);
    }

    PressureLaw law_;
    double eps2_;
    Grid1D grid_;
    double h_;
    const SelfSimilarProfile& profile_;
    double x0_;
    double floor_;
    bool prepared_ = false;
    double t_ = 0.0;
    Eigen::VectorXd w_, wx_, wxx_, pw_, dpw_, face_;
};

double floor_for(const StepControls& c, double rho_minus, double rho_plus) {
    return c.positivity_floor * std::min(rho_minus, rho_plus);
}

}  // namespace

ScalarField quantum_term(const ScalarField& rho, double epsilon) {
    require_positive(rho, "density");
    const Grid1D& grid = rho.grid();
    if (epsilon == 0.0) return ScalarField(grid, Eigen::VectorXd::Zero(grid.size()), FarField<double>{0, 0});
    const ScalarField rx = diff(rho, 1);
    const ScalarField rxx = diff(rho, 2);
    Eigen::VectorXd inner = 0.5 * rxx.values() - 0.5 * rx.values().cwiseAbs2().cwiseQuotient(rho.values());
    const ScalarField out = diff(with_far_field(grid, std::move(inner), 0.0, 0.0), 2);
    return epsilon * epsilon * out;
}

ScalarField quantum_term_bohm(const ScalarField& rho, double epsilon) {
    require_positive(rho, "density");
    const Grid1D& grid = rho.grid();
    if (epsilon == 0.0) return ScalarField(grid, Eigen::VectorXd::Zero(grid.size()), FarField<double>{0, 0});
    const auto far = rho.far_field();
    const ScalarField s = with_far_field(grid, rho.values().cwiseSqrt(), std::sqrt(far.left), std::sqrt(far.right));
    const ScalarField bohm = with_far_field(grid, diff(s, 2).values().cwiseQuotient(s.values()), 0.0, 0.0);
    Eigen::VectorXd flux = rho.values().cwiseProduct(diff(bohm, 1).values());
    return epsilon * epsilon * diff(with_far_field(grid, std::move(flux), 0.0, 0.0), 1);
}

ScalarField rhs_density(const UnipolarState& state, const PressureLaw& law) {
    require_positive(state.rho, "density");
    const auto far = state.rho.far_field();
    Eigen::VectorXd p(state.rho.size());
    for (Index j = 0; j < p.size(); ++j) p[j] = law.p(state.rho[j]);
    const ScalarField pf = with_far_field(state.rho.grid(), std::move(p), law.p(far.left), law.p(far.right));
    return diff(pf, 2) - quantum_term(state.rho, state.epsilon);
}

UnipolarState step_implicit(const UnipolarState& state, const PressureLaw& law, double dt,
                            const StepControls& controls) {
    if (!(dt > 0.0)) fail(ErrorKind::invalid_argument, "time step must be positive");
    require_positive(state.rho, "density");
    const auto far = state.rho.far_field();
    const UnipolarSystem sys(law, state.epsilon, state.rho.grid(), far.left, far.right,
                             floor_for(controls, far.left, far.right));
    auto next = solve_with_halving(sys, state.rho.values(), dt, controls);
    if (!next) throw StepFailure(state.t, "backward-Euler step did not converge after halving");
    return UnipolarState{state.t + dt, ScalarField(state.rho.grid(), std::move(*next), far), state.epsilon};
}

UnipolarRun simulate_unipolar(const ScalarField& rho0, const PressureLaw& law, double epsilon,
                              const SelfSimilarProfile& profile, double x0, const RunOptions& options) {
    validate_outputs(options.outputs);
    require_positive(rho0, "initial density");
    const Grid1D& grid = rho0.grid();
    const double rm = profile.rho_minus();
    const double rp = profile.rho_plus();
    UnipolarSystem sys(law, epsilon, grid, rm, rp, floor_for(options.controls, rm, rp));

    DecaySeries series({"L2_k0", "L2_k1", "L2_k2", "Linf", "mass_defect", "min_rho", "dt", "mass_drift", "z_L2_k0",
                        "z_L2_k1", "z_L2_k2", "z_L2_k3"});
    std::vector<ScalarField> snapshots;
    double defect0 = 0.0;
    bool first = true;
    auto observe = [&](double t, const Eigen::VectorXd& y, double dt) {
        const ScalarField rho(grid, y, FarField<double>{rm, rp});
        const ScalarField diffw = rho - eval_wave(profile, x0, grid, t, 0);
        const double defect = integrate(diffw);
        if (first) defect0 = defect;
        first = false;
        ScalarField z = cumulative_integral(diffw);
        z.set_far_field({0.0, 0.0});
        series.append(t, {l2_norm(diffw), l2_norm(diff(diffw, 1)), l2_norm(diff(diffw, 2)), linf_norm(diffw),
                          std::abs(defect), y.minCoeff(), dt, std::abs(defect - defect0), l2_norm(z),
                          l2_norm(diff(z, 1)), l2_norm(diff(z, 2)), l2_norm(diff(z, 3))});
        if (options.keep_snapshots) snapshots.push_back(rho);
    };

    Eigen::VectorXd y = rho0.values();
    const double t0 = options.outputs.front();
    const StepStats stats = integrate_adaptive(sys, y, t0, options.outputs, options.controls, observe);
    return UnipolarRun{std::move(series),
                       UnipolarState{options.outputs.back(), ScalarField(grid, y, FarField<double>{rm, rp}), epsilon},
                       stats, std::move(snapshots)};
}

Perturbation to_perturbation(const ScalarField& rho, const ScalarField& wave) {
    if (!(rho.grid() == wave.grid())) fail(ErrorKind::invalid_argument, "fields live on different grids");
    ScalarField z = cumulative_integral(ScalarField(rho.grid(), rho.values() - wave.values()));
    const double defect = z[z.size() - 1];
    z.set_far_field({0.0, 0.0});
    return {std::move(z), defect};
}

ScalarField rhs_perturbation(const ScalarField& z, const SelfSimilarProfile& profile, double x0, double t,
                             const PressureLaw& law, double epsilon) {
    PerturbationSystem sys(law, epsilon, z.grid(), profile, x0, 0.0);
    sys.prepare(t);
    return ScalarField(z.grid(), sys.rhs(z.values()), FarField<double>{0, 0});
}

PerturbationRun simulate_perturbation(const ScalarField& z0, const SelfSimilarProfile& profile, double x0,
                                      const PressureLaw& law, double epsilon, const RunOptions& options) {
    validate_outputs(options.outputs);
    const Grid1D& grid = z0.grid();
    PerturbationSystem sys(law, epsilon, grid, profile, x0,
                           floor_for(options.controls, profile.rho_minus(), profile.rho_plus()));
    sys.prepare(options.outputs.front());
    if (!sys.admissible(z0.values()))
        fail(ErrorKind::positivity_violation, "initial W + z_x is not above the positivity floor");

    std::vector<ScalarField> snapshots;
    DecaySeries series({"z_L2_k0", "z_L2_k1", "z_L2_k2", "z_L2_k3", "z_Linf_k0", "z_Linf_k1", "z_Linf_k2",
                              "min_rho", "dt"});
    auto observe = [&](double t, const Eigen::VectorXd& y, double dt) {
        const ScalarField z(grid, y, FarField<double>{0, 0});
        const ScalarField zx = diff(z, 1);
        const ScalarField zxx = diff(z, 2);
        const ScalarField rho = eval_wave(profile, x0, grid, t, 0) + zx;
        series.append(t, {l2_norm(z), l2_norm(zx), l2_norm(zxx), l2_norm(diff(z, 3)), linf_norm(z),
                              linf_norm(zx), linf_norm(zxx), rho.values().minCoeff(), dt});
        if (options.keep_snapshots) snapshots.push_back(z);
    };

    Eigen::VectorXd y = z0.values();
    const StepStats stats =
        integrate_adaptive(sys, y, options.outputs.front(), options.outputs, options.controls, observe);
    return PerturbationRun{std::move(series),
                           PerturbationState{options.outputs.back(), ScalarField(grid, y, FarField<double>{0, 0}),
                                             epsilon},
                           stats, std::move(snapshots)};
}

}  // namespace qdd
