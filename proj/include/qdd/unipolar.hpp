#pragma once

#include <vector>

#include "qdd/diagnostics.hpp"
#include "qdd/grid.hpp"
#include "qdd/integrator.hpp"
#include "qdd/pressure.hpp"
#include "qdd/selfsimilar.hpp"

namespace qdd {

struct UnipolarState {
    double t = 0.0;
    /// Density with far-field pair (rho_minus, rho_plus).
    ScalarField rho;
    double epsilon = 0.0;
};

/// Antiderivative of rho - W; far field is zero on both sides.
struct PerturbationState {
    double t = 0.0;
    ScalarField z;
    double epsilon = 0.0;
};

/// eps^2 * d/dx [ rho_xxx / 2 - (rho_x^2 / rho)_x / 2 ], the quantum term of the unipolar model.
/// Throws positivity-violation if min rho <= 0.
ScalarField quantum_term(const ScalarField& rho, double epsilon);

/// The same term assembled from the Bohm form eps^2 (rho ((sqrt rho)_xx / sqrt rho)_x)_x.
/// Kept as an independent discretization for cross-checks.
ScalarField quantum_term_bohm(const ScalarField& rho, double epsilon);

/// d rho / dt = p(rho)_xx - quantum_term(rho).
ScalarField rhs_density(const UnipolarState& state, const PressureLaw& law);

/// One backward-Euler step of size dt. If Newton fails or the iterate drops below the positivity
/// floor, the step is split into two halves, recursively, at most controls.max_halvings deep.
UnipolarState step_implicit(const UnipolarState& state, const PressureLaw& law, double dt,
                            const StepControls& controls = {});

struct RunOptions {
    /// Ascending output times; the first entry is the start time.
    std::vector<double> outputs;
    StepControls controls;
    bool keep_snapshots = false;
};

struct UnipolarRun {
    DecaySeries series;
    UnipolarState final_state;
    StepStats stats;
    std::vector<ScalarField> snapshots;
};

/// Channels: L2_k0, L2_k1, L2_k2, Linf, mass_defect, min_rho, dt, mass_drift, z_L2_k0..3.
/// mass_defect is |integral(rho - W)|, mass_drift its change since the first output, and the z channels
/// are the derivative norms of the running integral of rho - W.
UnipolarRun simulate_unipolar(const ScalarField& rho0, const PressureLaw& law, double epsilon,
                              const SelfSimilarProfile& profile, double x0, const RunOptions& options);

struct Perturbation {
    ScalarField z;
    /// z(+L) = integral(rho - wave).
    double mass_defect;
};

Perturbation to_perturbation(const ScalarField& rho, const ScalarField& wave);

/// z_t = (p'(W) z_x)_x - (eps^2 / 2) z_xxxx + (f1 + f2)_x with
///   f1 = (eps^2 / 2) (W_x + z_xx)^2 / (W + z_x) - (eps^2 / 2) W_xx,
///   f2 = p(W + z_x) - p'(W) z_x - p(W).
ScalarField rhs_perturbation(const ScalarField& z, const SelfSimilarProfile& profile, double x0, double t,
                             const PressureLaw& law, double epsilon);

struct PerturbationRun {
    DecaySeries series;
    PerturbationState final_state;
    StepStats stats;
    std::vector<ScalarField> snapshots;
};

/// Channels: z_L2_k0..3, z_Linf_k0..2, min_rho (of W + z_x), dt.
PerturbationRun simulate_perturbation(const ScalarField& z0, const SelfSimilarProfile& profile, double x0,
                                      const PressureLaw& law, double epsilon, const RunOptions& options);

}  // namespace qdd
