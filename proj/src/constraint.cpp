#include "dsmpc/constraint.hpp"

#include <cmath>

namespace dsmpc {

double terminal_f(const Vec& xbar_N, const Precomputed& pre, const SystemModel& model) {
  if (xbar_N.size() != model.nx())
    throw DimensionMismatch("terminal_f: xbar_N must have length nx");
  const double t2 = model.t * model.t;
  const double gN = std::pow(model.gamma, model.N);
  const Vec d = xbar_N - model.x_ref;
  return pre.f_const + (gN / t2) * d.dot(pre.P_tilde * d) + 2.0 * pre.f_lin.dot(d);
}

ChebyshevTerms build_constraint(const Vec& x_k, const Precomputed& pre,
                                const SystemModel& model) {
  if (x_k.size() != model.nx())
    throw DimensionMismatch("build_constraint: x_k must have length nx");
  ChebyshevTerms terms;
  terms.G = pre.G;
  terms.g = pre.g_state * x_k + pre.g_const;
  terms.c0 = x_k.dot(pre.c0_quad * x_k) + 2.0 * pre.c0_lin.dot(x_k);
  terms.const_part = pre.const_part;

  // Self-contained closure: copies what it needs so the terms may outlive
  // the Precomputed they came from.
  terms.beta_lower = [x = Vec(x_k), C = model.C, Gamma = pre.Gamma_pred,
                      Theta = pre.Theta_pred, tr_ccx = pre.tr_ccx,
                      t2 = model.t * model.t, N = model.N](const Vec& m) {
    const Eigen::Index nx = C.cols();
    const Vec stacked = Gamma * x + Theta * m;
    std::vector<double> beta(static_cast<size_t>(N));
    beta[0] = (tr_ccx[0] + (C * x).squaredNorm()) / t2;
    for (int i = 1; i < N; ++i)
      beta[size_t(i)] =
          (tr_ccx[size_t(i)] + (C * stacked.segment((i - 1) * nx, nx)).squaredNorm()) /
          t2;
    return beta;
  };
  return terms;
}

double constraint_series_value(const std::vector<Vec>& xbar, const Precomputed& pre,
                               const SystemModel& model) {
  if (xbar.size() != size_t(model.N) + 1)
    throw DimensionMismatch("constraint_series_value: trajectory must have N+1 states");
  const double t2 = model.t * model.t;
  double c = 0.0;
  for (int i = 0; i < model.N; ++i)
    c += std::pow(model.gamma, i) *
         (pre.tr_ccx[size_t(i)] + (model.C * xbar[size_t(i)]).squaredNorm()) / t2;
  return c + terminal_f(xbar[size_t(model.N)], pre, model);
}

Vec reconstruct_disturbance(const Vec& x_next, const MpcSolution& prev,
                            const SystemModel& model) {
  if (prev.xbar_star.empty() || prev.m_star.size() < model.nu())
    throw MissingPreviousSolution("reconstruct_disturbance: no previous solution");
  if (x_next.size() != model.nx())
    throw DimensionMismatch("reconstruct_disturbance: x_next must have length nx");
  const Vec& x_prev = prev.xbar_star[0];
  const Vec u_prev = prev.m_star.head(model.nu());
  return x_next - model.A * x_prev - model.B * u_prev;
}

double update_epsilon(const Vec& x_next, const MpcSolution& prev,
                      const Precomputed& pre, const SystemModel& model) {
  if (prev.xbar_star.size() != size_t(model.N) + 1)
    throw MissingPreviousSolution("update_epsilon: no previous solution trajectory");
  const Vec omega = reconstruct_disturbance(x_next, prev, model);
  const double t2 = model.t * model.t;

  double eps = 0.0;
  for (int i = 0; i < model.N; ++i) {
    const Vec xb = prev.xbar_star[size_t(i) + 1] + pre.Phi_pow[size_t(i)] * omega;
    eps += std::pow(model.gamma, i) *
           (pre.tr_ccx[size_t(i)] + (model.C * xb).squaredNorm()) / t2;
  }
  // One-step extension of the previous nominal trajectory under the
  // terminal law m_N = K(x̄_N − x_ref) + u_ref.
  const Vec x_ext = pre.Phi * (prev.xbar_star[size_t(model.N)] - model.x_ref) +
                    model.x_ref + pre.Phi_pow[size_t(model.N)] * omega;
  return eps + terminal_f(x_ext, pre, model);
}

Vec shifted_sequence(const MpcSolution& prev, const Vec& omega,
                     const Precomputed& pre, const SystemModel& model) {
  if (prev.xbar_star.size() != size_t(model.N) + 1)
    throw MissingPreviousSolution("shifted_sequence: no previous solution trajectory");
  const Eigen::Index nu = model.nu();
  const int N = model.N;
  Vec shifted(N * nu);
  for (int i = 0; i + 1 < N; ++i)
    shifted.segment(i * nu, nu) =
        prev.m_star.segment((i + 1) * nu, nu) + model.K * (pre.Phi_pow[size_t(i)] * omega);
  const Vec m_tail =
      model.K * (prev.xbar_star[size_t(N)] - model.x_ref) + model.u_ref;
  shifted.segment((N - 1) * nu, nu) =
      m_tail + model.K * (pre.Phi_pow[size_t(N) - 1] * omega);
  return shifted;
}

double expected_epsilon_next(const MpcSolution& sol, const Precomputed& pre,
                             const SystemModel& model) {
  if (sol.xbar_star.size() != size_t(model.N) + 1)
    throw MissingPreviousSolution("expected_epsilon_next: solution lacks trajectory");
  const double t2 = model.t * model.t;
  double eps = 0.0;
  for (int i = 0; i < model.N; ++i)
    eps += std::pow(model.gamma, i) *
           (pre.tr_ccx[size_t(i)] +
            (model.C * sol.xbar_star[size_t(i) + 1]).squaredNorm()) /
           t2;
  const Vec x_ext =
      pre.Phi * (sol.xbar_star[size_t(model.N)] - model.x_ref) + model.x_ref;
  return eps + terminal_f(x_ext, pre, model) + pre.expected_noise_term;
}

}  // namespace dsmpc
