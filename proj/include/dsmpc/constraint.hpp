#pragma once

#include <functional>
#include <vector>

#include "dsmpc/qcqp.hpp"

namespace dsmpc {

/// The discounted Chebyshev risk functional as a scalar quadratic in the
/// stacked input sequence m:
///   c(m) = mᵀ G m + 2 gᵀ m + c0 + const_part
///        = Σ_{i=0}^{N−1} γⁱ [tr(CᵀC X̂_i) + ‖C x̄_i(m)‖²]/t² + f(x̄_N(m)).
/// const_part collects the state-independent pieces (stage traces and the
/// constant part of f); c0 the state-dependent constant.
struct ChebyshevTerms {
  double const_part = 0.0;
  Mat G;
  Vec g;
  double c0 = 0.0;
  /// Diagnostic: the per-stage lower bounds β_i = (tr(CᵀC X̂_i) + ‖C x̄_i‖²)/t²
  /// (i = 0..N−1) implied by a given input sequence. These are the values
  /// the eliminated per-stage risk variables take at equality.
  std::function<std::vector<double>(const Vec& m)> beta_lower;

  double value(const Vec& m) const {
    return m.dot(G * m) + 2.0 * g.dot(m) + c0 + const_part;
  }
};

/// Closed form of the infinite discounted tail beyond the horizon,
///   f(x̄_N) = Σ_{i=N}^∞ γⁱ [tr(CᵀC X̂_i) + ‖C x̄_i‖²]/t²
/// evaluated through S̃, P̃ and the geometric cross term:
///   f = tr(CᵀC S̃)/t² + (γᴺ/t²)[‖x̄_N − x_ref‖²_P̃ + ‖C x_ref‖²/(1−γ)]
///       + (2γᴺ/t²) x_refᵀ CᵀC (I − γΦ)⁻¹ (x̄_N − x_ref).
double terminal_f(const Vec& xbar_N, const Precomputed& pre, const SystemModel& model);

/// Risk functional at measured state x_k, condensed over m.
ChebyshevTerms build_constraint(const Vec& x_k, const Precomputed& pre,
                                const SystemModel& model);

/// Direct evaluation of the risk functional along a nominal trajectory
/// x̄_0..x̄_N. Algebraically equals ChebyshevTerms::value at the m that
/// generated the trajectory, but avoids the condensed form's cancellation
/// (whose error grows with ‖Aⁱ‖², noticeable for unstable A).
double constraint_series_value(const std::vector<Vec>& xbar, const Precomputed& pre,
                               const SystemModel& model);

/// ω_{k−1} = x_next − A x_{k−1} − B u_{k−1} from the stored previous solve.
Vec reconstruct_disturbance(const Vec& x_next, const MpcSolution& prev,
                            const SystemModel& model);

/// Budget update that keeps the shifted previous sequence feasible:
///   ε_k = Σ_{i=0}^{N−1} γⁱ [tr(CᵀC X̂_i) + ‖C(x̄*_{i+1|k−1} + Φⁱ ω)‖²]/t²
///         + f(x̄*_{N+1|k−1} + Φᴺ ω)
/// with x̄*_{N+1|k−1} = Φ(x̄*_{N|k−1} − x_ref) + x_ref and ω reconstructed
/// from the measured state. Equals c(shifted_sequence) at x_next exactly.
/// Throws MissingPreviousSolution when prev holds no trajectory (k = 0).
double update_epsilon(const Vec& x_next, const MpcSolution& prev,
                      const Precomputed& pre, const SystemModel& model);

/// The one-step-shifted, disturbance-corrected input sequence
///   m'_i = m*_{i+1} + K Φⁱ ω  (with m*_N := K(x̄*_N − x_ref) + u_ref):
/// feasible at budget update_epsilon(...) by construction.
Vec shifted_sequence(const MpcSolution& prev, const Vec& omega,
                     const Precomputed& pre, const SystemModel& model);

/// Closed-form conditional expectation 𝔼_k[ε_{k+1}] given the solution just
/// computed at x_k: the ε-update evaluated at ω = 0 plus the cached
/// disturbance correction. Satisfies γ·𝔼_k[ε_{k+1}] = c(m*) − ‖C x_k‖²/t².
double expected_epsilon_next(const MpcSolution& sol, const Precomputed& pre,
                             const SystemModel& model);

}  // namespace dsmpc
