#pragma once

#include <utility>
#include <vector>

#include "qdd/diagnostics.hpp"
#include "qdd/grid.hpp"
#include "qdd/integrator.hpp"
#include "qdd/pressure.hpp"
#include "qdd/selfsimilar.hpp"
#include "qdd/unipolar.hpp"

namespace qdd {

/// Two carriers with a shared far-field pair and the slaved field E = integral(rho_a - rho_b).
struct BipolarState {
    double t = 0.0;
    ScalarField rho_a;
    ScalarField rho_b;
    ScalarField e;
    double epsilon = 0.0;
};

/// Cumulative integral of rho_a - rho_b from -L.
/// Throws neutrality-violation if |E(+L)| > 1e-8 * ||rho_a - rho_b||_{L1}.
ScalarField electric_field(const ScalarField& rho_a, const ScalarField& rho_b);

/// Time derivatives of (rho_a, rho_b): rhs_density(rho_i) -/+ (rho_i E)_x with E recomputed from the densities.
std::pair<ScalarField, ScalarField> rhs_bipolar(const BipolarState& state, const PressureLaw& law);

/// Backward-Euler step of the coupled system.
///
/// Newton works on the half-sum m = (rho_a + rho_b) / 2, half-difference q = (rho_a - rho_b) / 2 and E,
/// interleaved per node as (m_j, q_j, E_j). E is tied to q by the trapezoid rows
/// E_0 = 0, E_j = E_{j-1} + h (q_j + q_{j-1}), which keeps the Jacobian banded (7 + 7), and is
/// recomputed by quadrature after every iterate. Every expression is written even or odd in q, so
/// exchanging the carriers maps the iterates to themselves with q, E negated bit for bit, and q keeps
/// full relative precision after E has decayed far below the density round-off.
BipolarState step_bipolar(const BipolarState& state, const PressureLaw& law, double dt,
                          const StepControls& controls = {});

/// Builds a state at time t with E computed from the densities.
BipolarState make_bipolar_state(double t, ScalarField rho_a, ScalarField rho_b, double epsilon);

struct BipolarRun {
    DecaySeries series;
    BipolarState final_state;
    StepStats stats;
    std::vector<BipolarState> snapshots;
};

/// Per-carrier channels (suffix _a, _b): L2_k0, L2_k1, L2_k2, Linf, mass_defect, mass_drift, min_rho,
/// z_L2_k0..3. Shared channels: L2_E, L2_Ex, H1_E, L2_diff (||rho_a - rho_b||), neutrality, dt.
BipolarRun simulate_bipolar(const ScalarField& rho_a0, const ScalarField& rho_b0, const PressureLaw& law,
                            double epsilon, const SelfSimilarProfile& profile, double x0, const RunOptions& options);

struct BipolarTransform {
    ScalarField z_a;
    ScalarField z_b;
    /// z_a - z_b.
    ScalarField e;
    /// E_t - (p'(W) E_x)_x + (eps^2/2) E_xxxx + 2 W E - (f_a1 - f_b1 + f_a2 - f_b2)_x + (z_a,x + z_b,x) E,
    /// with E_t the backward difference between `previous` and `state`.
    ScalarField residual_e;
};

BipolarTransform transform_bipolar(const BipolarState& previous, const BipolarState& state,
                                   const SelfSimilarProfile& profile, double x0, const PressureLaw& law);

}  // namespace qdd
