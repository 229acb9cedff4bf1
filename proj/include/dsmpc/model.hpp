#pragma once

#include <string>
#include <vector>

#include "dsmpc/linalg.hpp"

namespace dsmpc {

/// Problem data for one control design:
///   dynamics   x⁺ = A x + B u + ω,  E[ω] = 0,  E[ωωᵀ] = W
///   risk       Σ_k γᵏ P(‖C x_k‖ ≥ t) ≤ e   (enforced via a Chebyshev bound)
///   cost       E Σ_k ‖x_k − x_ref‖²_Q + ‖u_k − u_ref‖²_R
/// K is the stabilizing prediction feedback, N the prediction horizon.
struct SystemModel {
  Mat A;
  Mat B;
  Mat W;
  Mat C;
  double t = 0.0;
  double e = 0.0;
  double gamma = 0.0;
  Mat Q;
  Mat R;
  Vec x_ref;
  Vec u_ref;
  Mat K;
  int N = 0;

  Eigen::Index nx() const { return A.rows(); }
  Eigen::Index nu() const { return B.cols(); }
  Eigen::Index ny() const { return C.rows(); }
};

/// One named assumption check with its measured witness value.
struct ValidationCheck {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;

  bool ok() const;
  /// Lookup by name; nullptr when absent.
  const ValidationCheck* find(const std::string& name) const;
  /// Comma-separated names of failing checks (empty when ok).
  std::string failures() const;
};

/// Checks every standing assumption: scalar ranges, symmetry/definiteness
/// of W, Q, R, the reference pair being a steady state with ‖C x_ref‖ < t,
/// ρ(A + BK) < 1, controllability of (A,B) and observability of (A,
/// Q^{1/2}). Shape inconsistencies throw DimensionMismatch before any
/// check runs; everything else lands in the report.
ValidationReport validate(const SystemModel& model);

/// Infinite-horizon discounted* LQ solution for (A, B, Q, R).
/// (*undiscounted Riccati; the discount enters the risk side only.)
struct LqSolution {
  Mat K_lq;    ///< u = u_ref + K_lq (x − x_ref)
  Mat P_dare;  ///< Riccati fixed point
  int iterations = 0;
  double residual = 0.0;
};

/// Riccati fixed point P ← AᵀPA − AᵀPB(R + BᵀPB)⁻¹BᵀPA + Q from P₀ = Q,
/// elementwise tolerance 1e-12, cap 10000 iterations; then
/// K_lq = −(R + BᵀPB)⁻¹BᵀPA. Throws RiccatiNonConvergence when the cap is
/// reached, the residual stays above 1e-9, or A + B K_lq is not stable.
LqSolution lq_gain(const SystemModel& model);

/// Everything the controller needs that does not depend on the measured
/// state: closed-loop matrices, covariance ladder, the three steady-state
/// matrix equations, prediction operators and the condensed cost /
/// constraint data.
///
/// With Φ = A + BK:
///   Xhat[0] = 0,          Xhat[i+1] = Φ Xhat[i] Φᵀ + W
///   P       = Φᵀ P Φ + Kᵀ R K + Q            (certainty-equivalent cost-to-go)
///   P_tilde = γ Φᵀ P_tilde Φ + CᵀC           (discounted output energy)
///   S_tilde = γ Φ S_tilde Φᵀ + γ^{N+1}/(1−γ) W + γᴺ Xhat[N]
///             (tail covariance: Σ_{i≥N} γⁱ Xhat[i] = tr-paired with CᵀC)
struct Precomputed {
  Mat Phi;
  std::vector<Mat> Xhat;  ///< indices 0..N
  Mat P;
  Mat P_tilde;
  Mat S_tilde;
  Mat K_lq;
  Mat P_dare;
  double trWP = 0.0;  ///< per-step expected stage cost floor, tr(W P)

  /// Worst residual among the three matrix equations above.
  double equation_residual = 0.0;

  // --- prediction operators (nominal, under the decision sequence m) ---
  // Stacked means for i = 1..N: X̄ = Gamma_pred x + Theta_pred m, with
  // x̄_i = Aⁱ x + Σ_{j<i} A^{i−1−j} B m_j.
  Mat Gamma_pred;  ///< (N·nx) × nx
  Mat Theta_pred;  ///< (N·nx) × (N·nu)

  // --- cached scalars reused every step ---
  Mat CtC;                     ///< CᵀC
  std::vector<Mat> Phi_pow;    ///< Φⁱ, i = 0..N
  std::vector<double> tr_ccx;  ///< tr(CᵀC Xhat[i]), i = 0..N

  // Terminal tail value f(x̄) = f_const + (γᴺ/t²)‖x̄ − x_ref‖²_P̃ + 2 f_linᵀ(x̄ − x_ref).
  double f_const = 0.0;
  Vec f_lin;

  // 𝔼[f(x̄+Φᴺω)] − f(x̄) plus the stage-sum analogue: the state-independent
  // disturbance correction in the expected next budget,
  //   (Σ_{i<N} γⁱ tr(CᵀC Φⁱ W Φⁱᵀ) + γᴺ tr(P̃ Φᴺ W Φᴺᵀ)) / t².
  double expected_noise_term = 0.0;

  // --- condensed quadratic cost over m (length N·nu) ---
  // J(m; x) = mᵀ H m + 2 (h_state x + h_const)ᵀ m
  //           + xᵀ j0_quad x + 2 j0_linᵀ x + j0_const
  Mat H;
  Mat h_state;
  Vec h_const;
  Mat j0_quad;
  Vec j0_lin;
  double j0_const = 0.0;

  // --- condensed risk functional over m ---
  // c(m; x) = mᵀ G m + 2 (g_state x + g_const)ᵀ m
  //           + xᵀ c0_quad x + 2 c0_linᵀ x + const_part
  Mat G;
  Mat g_state;
  Vec g_const;
  Mat c0_quad;
  Vec c0_lin;
  double const_part = 0.0;
};

/// Runs validate() (throwing std::invalid_argument on failure) and builds
/// every quantity above. Matrix-equation residuals above 1e-9 throw
/// LyapunovFailure.
Precomputed precompute(const SystemModel& model);

/// Residual check helper: ‖lhs − rhs‖_max of the five matrix equations, in
/// order P, P_tilde, S_tilde, Riccati (P_dare), covariance recursion (worst
/// step of the Xhat ladder).
std::vector<double> equation_residuals(const SystemModel& model, const Precomputed& pre);

/// Closed form of the discounted Chebyshev sum under the pure LQ policy
/// u = u_ref + K_lq (x − x_ref) started at x0:
///   Σ_i γⁱ (tr(CᵀC X̂ⁱ_lq) + ‖C x̄ⁱ_lq‖²) / t²
/// computed from the discounted Lyapunov solution for Φ_lq = A + B K_lq.
double lq_output_bound(const SystemModel& model, const Vec& x0);

}  // namespace dsmpc
