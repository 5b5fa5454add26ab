#include "qdd/bipolar.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "qdd/error.hpp"

namespace qdd {

namespace {

ScalarField zero_far(const Grid1D& grid, Eigen::VectorXd v) {
    return ScalarField(grid, std::move(v), FarField<double>{0.0, 0.0});
}

// Trapezoid running integral of 2q, written so that q -> -q gives E -> -E exactly.
void fill_field(Eigen::VectorXd& y, Index n, double h) {
    y[2] = 0.0;
    for (Index j = 1; j < n; ++j) y[3 * j + 2] = y[3 * j - 1] + h * (y[3 * j + 1] + y[3 * j - 2]);
}

struct NodeTerms {
    double phi_bar;  // (Phi_a + Phi_b) / 2
    double phi_gap;  // (Phi_a - Phi_b) / 2
    // derivatives with respect to m_{j-1}, m_j, m_{j+1} and q_{j-1}, q_j, q_{j+1}
    std::array<double, 3> bar_m, bar_q, gap_m, gap_q;
};

class BipolarSystem {
public:
    BipolarSystem(const PressureLaw& law, double epsilon, const Grid1D& grid, double rho_minus, double rho_plus,
                  const StepControls& controls)
        : law_(law), eps2_(epsilon * epsilon), h_(grid.spacing()), n_(grid.size()), left_(rho_minus),
          right_(rho_plus), floor_(controls.positivity_floor * std::min(rho_minus, rho_plus)),
          weight_(controls.error_target / controls.relative_target) {}

    Index lower_bandwidth() const { return 7; }
    Index upper_bandwidth() const { return 7; }
    void prepare(double) {}
    void normalize(Eigen::VectorXd& y) const { fill_field(y, n_, h_); }

    bool admissible(const Eigen::VectorXd& y) const {
        for (Index j = 0; j < n_; ++j)
            if (!(y[3 * j] - std::abs(y[3 * j + 1]) > floor_)) return false;
        return true;
    }

    bool converged(const Eigen::VectorXd& d, const Eigen::VectorXd& y, double tol) const {
        double dm = 0.0, dq = 0.0, qmax = 0.0;
        for (Index j = 0; j < n_; ++j) {
            dm = std::max(dm, std::abs(d[3 * j]));
            dq = std::max(dq, std::abs(d[3 * j + 1]));
            qmax = std::max(qmax, std::abs(y[3 * j + 1]));
        }
        return dm <= tol && (dq == 0.0 || dq <= tol * qmax);
    }

    /// Largest carrier-wise difference, combined with the charge difference relative to the charge size.
    double error_norm(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
        double carrier = 0.0, dq = 0.0, qmax = 0.0;
        for (Index j = 0; j < n_; ++j) {
            const double em = std::abs(a[3 * j] - b[3 * j]);
            const double eq = std::abs(a[3 * j + 1] - b[3 * j + 1]);
            carrier = std::max(carrier, em + eq);
            dq = std::max(dq, eq);
            qmax = std::max(qmax, std::max(std::abs(a[3 * j + 1]), std::abs(b[3 * j + 1])));
        }
        const double relative = qmax > 0.0 ? weight_ * dq / qmax : 0.0;
        return std::max(carrier, relative);
    }

    Eigen::VectorXd rhs(const Eigen::VectorXd& y) const {
        std::vector<NodeTerms> terms(static_cast<std::size_t>(n_));
        for (Index j = 0; j < n_; ++j) terms[j] = node(y, j, false);
        const double pl = law_.p(left_);
        const double pr = law_.p(right_);
        const double inv_h2 = 1.0 / (h_ * h_);
        Eigen::VectorXd out = Eigen::VectorXd::Zero(3 * n_);
        for (Index i = 0; i < n_; ++i) {
            const double bar_lo = i > 0 ? terms[i - 1].phi_bar : pl;
            const double bar_hi = i + 1 < n_ ? terms[i + 1].phi_bar : pr;
            const double gap_lo = i > 0 ? terms[i - 1].phi_gap : 0.0;
            const double gap_hi = i + 1 < n_ ? terms[i + 1].phi_gap : 0.0;
            const double qe = (q(y, i + 1) * e(y, i + 1) - q(y, i - 1) * e(y, i - 1)) / (2.0 * h_);
            const double me = (m(y, i + 1) * e(y, i + 1) - m(y, i - 1) * e(y, i - 1)) / (2.0 * h_);
            out[3 * i] = (bar_hi - 2.0 * terms[i].phi_bar + bar_lo) * inv_h2 - qe;
            out[3 * i + 1] = (gap_hi - 2.0 * terms[i].phi_gap + gap_lo) * inv_h2 - me;
        }
        return out;
    }

    Eigen::VectorXd residual(const Eigen::VectorXd& y, const Eigen::VectorXd& base, double gdt) const {
        const Eigen::VectorXd f = rhs(y);
        Eigen::VectorXd r(3 * n_);
        for (Index j = 0; j < n_; ++j) {
            r[3 * j] = y[3 * j] - base[3 * j] - gdt * f[3 * j];
            r[3 * j + 1] = y[3 * j + 1] - base[3 * j + 1] - gdt * f[3 * j + 1];
            r[3 * j + 2] = j == 0 ? y[2] : y[3 * j + 2] - y[3 * j - 1] - h_ * (y[3 * j + 1] + y[3 * j - 2]);
        }
        return r;
    }

    BandedMatrix<double> jacobian(const Eigen::VectorXd& y, double gdt) const {
        std::vector<NodeTerms> terms(static_cast<std::size_t>(n_));
        for (Index j = 0; j < n_; ++j) terms[j] = node(y, j, true);
        BandedMatrix<double> jac(3 * n_, 7, 7);
        const double c = gdt / (h_ * h_);
        for (Index i = 0; i < n_; ++i) {
            const Index rm = 3 * i, rq = 3 * i + 1, re = 3 * i + 2;
            jac.add(rm, rm, 1.0);
            jac.add(rq, rq, 1.0);
            for (Index di = -1; di <= 1; ++di) {
                const Index j = i + di;
                if (j < 0 || j >= n_) continue;
                const double w = (di == 0 ? -2.0 : 1.0) * c;
                const NodeTerms& t = terms[j];
                for (Index dk = -1; dk <= 1; ++dk) {
                    const Index k = j + dk;
                    if (k < 0 || k >= n_) continue;
                    jac.add(rm, 3 * k, -w * t.bar_m[dk + 1]);
                    jac.add(rm, 3 * k + 1, -w * t.bar_q[dk + 1]);
                    jac.add(rq, 3 * k, -w * t.gap_m[dk + 1]);
                    jac.add(rq, 3 * k + 1, -w * t.gap_q[dk + 1]);
                }
            }
            for (Index side : {Index(-1), Index(1)}) {
                const Index j = i + side;
                if (j < 0 || j >= n_) continue;
                const double coef = gdt * static_cast<double>(side) / (2.0 * h_);
                jac.add(rm, 3 * j + 1, coef * y[3 * j + 2]);
                jac.add(rm, 3 * j + 2, coef * y[3 * j + 1]);
                jac.add(rq, 3 * j, coef * y[3 * j + 2]);
                jac.add(rq, 3 * j + 2, coef * y[3 * j]);
            }
            jac.add(re, re, 1.0);
            if (i > 0) {
                jac.add(re, re - 3, -1.0);
                jac.add(re, rq, -h_);
                jac.add(re, rq - 3, -h_);
            }
        }
        return jac;
    }

private:
    double m(const Eigen::VectorXd& y, Index j) const { return j < 0 ? left_ : j >= n_ ? right_ : y[3 * j]; }
    double q(const Eigen::VectorXd& y, Index j) const { return j < 0 || j >= n_ ? 0.0 : y[3 * j + 1]; }
    double e(const Eigen::VectorXd& y, Index j) const { return j < 0 || j >= n_ ? 0.0 : y[3 * j + 2]; }

    NodeTerms node(const Eigen::VectorXd& y, Index j, bool with_derivatives) const {
        const double mj = y[3 * j];
        const double qj = y[3 * j + 1];
        const double mlo = m(y, j - 1), mhi = m(y, j + 1);
        const double qlo = q(y, j - 1), qhi = q(y, j + 1);
        const double mx = (mhi - mlo) / (2.0 * h_);
        const double qx = (qhi - qlo) / (2.0 * h_);
        const double mxx = (mhi - 2.0 * mj + mlo) / (h_ * h_);
        const double qxx = (qhi - 2.0 * qj + qlo) / (h_ * h_);
        const double a = mj + qj, b = mj - qj;
        const double ax = mx + qx, bx = mx - qx;
        const double ab = a * b;
        const auto pa = law_.eval(a);
        const auto pb = law_.eval(b);
        const auto gap = law_.half_difference(mj, qj);
        // S = a_x^2/a + b_x^2/b, T = a_x^2/a - b_x^2/b = N / (ab)
        const double s = ax * ax / a + bx * bx / b;
        const double num = 4.0 * mj * mx * qx - 2.0 * qj * (mx * mx + qx * qx);
        const double t = num / ab;

        NodeTerms out{};
        out.phi_bar = 0.5 * (pa.p + pb.p) - 0.5 * eps2_ * mxx + 0.25 * eps2_ * s;
        out.phi_gap = gap.p - 0.5 * eps2_ * qxx + 0.25 * eps2_ * t;
        if (!with_derivatives) return out;

        const double dp_mean = 0.5 * (pa.dp + pb.dp);
        const double cross = qx * mj - mx * qj;
        const double s_m = -(ax * ax / (a * a) + bx * bx / (b * b));
        const double s_q = -4.0 * cross * (mx * mj - qx * qj) / (ab * ab);
        const double s_mx = 2.0 * ax / a + 2.0 * bx / b;
        const double s_qx = 4.0 * cross / ab;
        const double t_m = 4.0 * mx * qx / ab - num * 2.0 * mj / (ab * ab);
        const double t_q = -2.0 * (mx * mx + qx * qx) / ab + num * 2.0 * qj / (ab * ab);
        const double t_mx = (4.0 * mj * qx - 4.0 * qj * mx) / ab;
        const double t_qx = (4.0 * mj * mx - 4.0 * qj * qx) / ab;

        const double lap = eps2_ / (h_ * h_);
        const double q4 = 0.25 * eps2_;
        const double inv2h = 1.0 / (2.0 * h_);
        out.bar_m = {-0.5 * lap - q4 * s_mx * inv2h, dp_mean + lap + q4 * s_m, -0.5 * lap + q4 * s_mx * inv2h};
        out.bar_q = {-q4 * s_qx * inv2h, gap.dp + q4 * s_q, q4 * s_qx * inv2h};
        out.gap_m = {-q4 * t_mx * inv2h, gap.dp + q4 * t_m, q4 * t_mx * inv2h};
        out.gap_q = {-0.5 * lap - q4 * t_qx * inv2h, dp_mean + lap + q4 * t_q, -0.5 * lap + q4 * t_qx * inv2h};
        return out;
    }

    PressureLaw law_;
    double eps2_;
    double h_;
    Index n_;
    double left_;
    double right_;
    double floor_;
    double weight_;
};

Eigen::VectorXd pack(const BipolarState& state) {
    const Index n = state.rho_a.size();
    Eigen::VectorXd y(3 * n);
    for (Index j = 0; j < n; ++j) {
        y[3 * j] = 0.5 * (state.rho_a[j] + state.rho_b[j]);
        y[3 * j + 1] = 0.5 * (state.rho_a[j] - state.rho_b[j]);
    }
    fill_field(y, n, state.rho_a.grid().spacing());
    return y;
}

BipolarState unpack(const Eigen::VectorXd& y, const Grid1D& grid, double t, double epsilon, FarField<double> far) {
    const Index n = grid.size();
    Eigen::VectorXd a(n), b(n), e(n);
    for (Index j = 0; j < n; ++j) {
        a[j] = y[3 * j] + y[3 * j + 1];
        b[j] = y[3 * j] - y[3 * j + 1];
        e[j] = y[3 * j + 2];
    }
    return BipolarState{t, ScalarField(grid, std::move(a), far), ScalarField(grid, std::move(b), far),
                        zero_far(grid, std::move(e)), epsilon};
}

void check_carriers(const ScalarField& a, const ScalarField& b) {
    if (!(a.grid() == b.grid())) fail(ErrorKind::invalid_argument, "carriers live on different grids");
    if (!(a.values().minCoeff() > 0.0) || !(b.values().minCoeff() > 0.0))
        fail(ErrorKind::positivity_violation, "carrier densities must be strictly positive");
    const auto fa = a.far_field();
    const auto fb = b.far_field();
    if (fa.left != fb.left || fa.right != fb.right)
        fail(ErrorKind::invalid_argument, "both carriers must share the far-field pair");
}

ScalarField flux_density(const ScalarField& z, const ScalarField& w, const ScalarField& wx, const ScalarField& wxx,
                         const PressureLaw& law, double eps2) {
    const ScalarField u = diff(z, 1);
    const ScalarField v = diff(z, 2);
    Eigen::VectorXd f(z.size());
    for (Index j = 0; j < f.size(); ++j) {
        const double s = w[j] + u[j];
        if (!(s > 0.0)) fail(ErrorKind::positivity_violation, "W + z_x must be strictly positive");
        const double qv = wx[j] + v[j];
        const auto pw = law.eval(w[j]);
        f[j] = 0.5 * eps2 * (qv * qv / s - wxx[j]) + law.p(s) - pw.dp * u[j] - pw.p;
    }
    return zero_far(z.grid(), std::move(f));
}

}  // namespace

ScalarField electric_field(const ScalarField& rho_a, const ScalarField& rho_b) {
    if (!(rho_a.grid() == rho_b.grid())) fail(ErrorKind::invalid_argument, "carriers live on different grids");
    const ScalarField gap(rho_a.grid(), rho_a.values() - rho_b.values());
    ScalarField e = cumulative_integral(gap);
    const double total = std::abs(e[e.size() - 1]);
    const double l1 = integrate(ScalarField(gap.grid(), gap.values().cwiseAbs()));
    if (total > 1e-8 * l1)
        fail(ErrorKind::neutrality_violation,
             "integral of rho_a - rho_b is " + std::to_string(total) + ", not zero within 1e-8 of its L1 norm");
    e.set_far_field({0.0, 0.0});
    return e;
}

BipolarState make_bipolar_state(double t, ScalarField rho_a, ScalarField rho_b, double epsilon) {
    check_carriers(rho_a, rho_b);
    ScalarField e = electric_field(rho_a, rho_b);
    return BipolarState{t, std::move(rho_a), std::move(rho_b), std::move(e), epsilon};
}

std::pair<ScalarField, ScalarField> rhs_bipolar(const BipolarState& state, const PressureLaw& law) {
    check_carriers(state.rho_a, state.rho_b);
    const ScalarField e = electric_field(state.rho_a, state.rho_b);
    const Grid1D& grid = state.rho_a.grid();
    const ScalarField drift_a = diff(zero_far(grid, state.rho_a.values().cwiseProduct(e.values())), 1);
    const ScalarField drift_b = diff(zero_far(grid, state.rho_b.values().cwiseProduct(e.values())), 1);
    ScalarField ra = rhs_density(UnipolarState{state.t, state.rho_a, state.epsilon}, law) - drift_a;
    ScalarField rb = rhs_density(UnipolarState{state.t, state.rho_b, state.epsilon}, law) + drift_b;
    return {std::move(ra), std::move(rb)};
}

BipolarState step_bipolar(const BipolarState& state, const PressureLaw& law, double dt,
                          const StepControls& controls) {
    if (!(dt > 0.0)) fail(ErrorKind::invalid_argument, "time step must be positive");
    check_carriers(state.rho_a, state.rho_b);
    const Grid1D& grid = state.rho_a.grid();
    const auto far = state.rho_a.far_field();
    const BipolarSystem sys(law, state.epsilon, grid, far.left, far.right, controls);
    auto next = solve_with_halving(sys, pack(state), dt, controls);
    if (!next) throw StepFailure(state.t, "bipolar backward-Euler step did not converge after halving");
    return unpack(*next, grid, state.t + dt, state.epsilon, far);
}

BipolarRun simulate_bipolar(const ScalarField& rho_a0, const ScalarField& rho_b0, const PressureLaw& law,
                            double epsilon, const SelfSimilarProfile& profile, double x0, const RunOptions& options) {
    validate_outputs(options.outputs);
    check_carriers(rho_a0, rho_b0);
    electric_field(rho_a0, rho_b0);
    const Grid1D& grid = rho_a0.grid();
    const Index n = grid.size();
    const FarField<double> far{profile.rho_minus(), profile.rho_plus()};
    BipolarSystem sys(law, epsilon, grid, far.left, far.right, options.controls);

    std::vector<std::string> names;
    for (const char* suffix : {"_a", "_b"})
        for (const char* base : {"L2_k0", "L2_k1", "L2_k2", "Linf", "mass_defect", "mass_drift", "min_rho", "z_L2_k0",
                                 "z_L2_k1", "z_L2_k2", "z_L2_k3"})
            names.push_back(std::string(base) + suffix);
    for (const char* shared : {"L2_E", "L2_Ex", "H1_E", "L2_diff", "neutrality", "dt"}) names.emplace_back(shared);
    DecaySeries series(names);
    std::vector<BipolarState> snapshots;
    std::array<double, 2> defect0{};
    bool first = true;

    auto observe = [&](double t, const Eigen::VectorXd& y, double dt) {
        const ScalarField w = eval_wave(profile, x0, grid, t, 0);
        Eigen::VectorXd mw(n), qv(n), ev(n);
        for (Index j = 0; j < n; ++j) {
            mw[j] = y[3 * j] - w[j];
            qv[j] = y[3 * j + 1];
            ev[j] = y[3 * j + 2];
        }
        const ScalarField mean_dev = zero_far(grid, mw);
        const ScalarField charge = zero_far(grid, qv);
        const ScalarField e = zero_far(grid, ev);
        const ScalarField z_mean = cumulative_integral(mean_dev);
        std::vector<double> row;
        row.reserve(names.size());
        for (int c = 0; c < 2; ++c) {
            const double sign = c == 0 ? 1.0 : -1.0;
            const ScalarField dev = zero_far(grid, mw + sign * qv);
            const ScalarField z = zero_far(grid, z_mean.values() + (0.5 * sign) * ev);
            const double defect = integrate(mean_dev) + sign * integrate(charge);
            if (first) defect0[c] = defect;
            double min_rho = 0.0;
            for (Index j = 0; j < n; ++j) {
                const double r = y[3 * j] + sign * y[3 * j + 1];
                min_rho = j == 0 ? r : std::min(min_rho, r);
            }
            row.insert(row.end(), {l2_norm(dev), l2_norm(diff(dev, 1)), l2_norm(diff(dev, 2)), linf_norm(dev),
                                   std::abs(defect), std::abs(defect - defect0[c]), min_rho, l2_norm(z),
                                   l2_norm(diff(z, 1)), l2_norm(diff(z, 2)), l2_norm(diff(z, 3))});
        }
        first = false;
        const double l2e = l2_norm(e);
        const double l2ex = l2_norm(diff(e, 1));
        const double scale = std::max(l2e, l2ex);
        const double h1 = scale == 0.0 ? 0.0 : scale * std::hypot(l2e / scale, l2ex / scale);
        row.insert(row.end(), {l2e, l2ex, h1, 2.0 * l2_norm(charge), std::abs(ev[n - 1]), dt});
        series.append(t, row);
        if (options.keep_snapshots) snapshots.push_back(unpack(y, grid, t, epsilon, far));
    };

    BipolarState initial{options.outputs.front(), rho_a0, rho_b0, ScalarField(grid), epsilon};
    Eigen::VectorXd y = pack(initial);
    const StepStats stats =
        integrate_adaptive(sys, y, options.outputs.front(), options.outputs, options.controls, observe);
    return BipolarRun{std::move(series), unpack(y, grid, options.outputs.back(), epsilon, far), stats,
                      std::move(snapshots)};
}

BipolarTransform transform_bipolar(const BipolarState& previous, const BipolarState& state,
                                   const SelfSimilarProfile& profile, double x0, const PressureLaw& law) {
    check_carriers(state.rho_a, state.rho_b);
    if (!(state.t > previous.t)) fail(ErrorKind::invalid_argument, "previous state must be earlier");
    const Grid1D& grid = state.rho_a.grid();
    const double eps2 = state.epsilon * state.epsilon;
    auto zs = [&](const BipolarState& s) {
        const ScalarField w = eval_wave(profile, x0, grid, s.t, 0);
        return std::pair{to_perturbation(s.rho_a, w).z, to_perturbation(s.rho_b, w).z};
    };
    auto [za, zb] = zs(state);
    auto [pa, pb] = zs(previous);
    const ScalarField e = za - zb;
    const ScalarField e_prev = pa - pb;

    const ScalarField w = eval_wave(profile, x0, grid, state.t, 0);
    const ScalarField wx = eval_wave(profile, x0, grid, state.t, 1);
    const ScalarField wxx = eval_wave(profile, x0, grid, state.t, 2);
    Eigen::VectorXd dpw(grid.size());
    for (Index j = 0; j < dpw.size(); ++j) dpw[j] = law.dp(w[j]);

    const ScalarField ex = diff(e, 1);
    const ScalarField diffusion = diff(zero_far(grid, dpw.cwiseProduct(ex.values())), 1);
    const ScalarField fa = flux_density(za, w, wx, wxx, law, eps2);
    const ScalarField fb = flux_density(zb, w, wx, wxx, law, eps2);
    const ScalarField source = diff(fa - fb, 1);
    const ScalarField slope_sum = diff(za, 1) + diff(zb, 1);

    Eigen::VectorXd r = (e.values() - e_prev.values()) / (state.t - previous.t) - diffusion.values() +
                        0.5 * eps2 * diff(e, 4).values() + 2.0 * w.values().cwiseProduct(e.values()) -
                        source.values() + slope_sum.values().cwiseProduct(e.values());
    return BipolarTransform{std::move(za), std::move(zb), e, zero_far(grid, std::move(r))};
}

}  // namespace qdd
