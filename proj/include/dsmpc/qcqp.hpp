#pragma once

#include <vector>

#include "dsmpc/model.hpp"

namespace dsmpc {

/// Condensed MPC optimisation: minimize a strictly convex quadratic in the
/// stacked input sequence m subject to one convex quadratic constraint.
///   J(m) = mᵀ H m + 2 hᵀ m + j0,   c(m) = mᵀ G m + 2 gᵀ m + c_const ≤ eps
struct QcqpProblem {
  Mat H;
  Vec h;
  double j0 = 0.0;
  Mat G;
  Vec g;
  double c_const = 0.0;
  double eps = 0.0;

  double objective(const Vec& m) const { return m.dot(H * m) + 2.0 * h.dot(m) + j0; }
  double constraint(const Vec& m) const {
    return m.dot(G * m) + 2.0 * g.dot(m) + c_const;
  }
};

struct MpcSolution {
  Vec m_star;
  std::vector<Vec> xbar_star;  ///< nominal trajectory x̄_0..x̄_N (filled by solve_mpc)
  double J_star = 0.0;
  double lambda_star = 0.0;
  double constraint_value = 0.0;
  bool active = false;
};

/// Global optimum of the convex problem by dual scalar search.
///
/// The unconstrained minimiser m_u = −H⁻¹h is returned with λ = 0 whenever
/// it already satisfies the constraint (boundary-grazing tolerance 1e-9).
/// Otherwise λ > 0 solves φ(λ) = c(m(λ)) − eps = 0 with
/// m(λ) = −(H+λG)⁻¹(h+λg); φ is continuous and strictly decreasing, so a
/// doubling bracket plus safeguarded Newton converges. Termination prefers
/// the feasible side: the returned point has φ ∈ [−1e-9·max(1,eps), 0], and
/// the iteration aims three orders tighter so that downstream budget
/// identities hold to ~1e-12.
///
/// Throws Infeasible when inf_m c(m) > eps + 1e-9 (carrying that infimum),
/// NonConvergence after 200 safeguarded iterations.
MpcSolution solve(const QcqpProblem& p);

/// inf_m c(m), finite for the bounded-below constraint quadratics built
/// here (c ≥ 0); computed by a pseudo-solve of G m = −g restricted to the
/// range of G (eigenvalues below 1e-12·max(1,λ_max) are treated as zero).
double min_constraint_value(const QcqpProblem& p);

/// Assembles the condensed problem at measured state x and budget eps from
/// the cached condensing data.
QcqpProblem build_problem(const Vec& x, double eps, const Precomputed& pre,
                          const SystemModel& model);

/// build_problem + solve, then recovers the nominal trajectory
/// x̄_0 = x, X̄_{1..N} = Gamma_pred x + Theta_pred m*. The reported
/// constraint_value is the stagewise series evaluation; when condensed-form
/// round-off would leave that evaluation above eps, the solve is repeated
/// with a budget tightened by the measured drift so the returned sequence
/// is feasible in the same arithmetic the ε-update uses.
MpcSolution solve_mpc(const Vec& x, double eps, const Precomputed& pre,
                      const SystemModel& model);

}  // namespace dsmpc
