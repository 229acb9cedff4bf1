#include "dsmpc/model.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dsmpc {

namespace {

// lq_only: check just the Riccati inputs (A, B, Q, R); used by lq_gain,
// which also serves to default K while a model is still being assembled.
void check_shapes(const SystemModel& m, bool lq_only = false) {
  std::ostringstream bad;
  const auto expect = [&bad](bool ok, const char* what) {
    if (!ok) bad << (bad.tellp() > 0 ? ", " : "") << what;
  };
  expect(m.A.rows() >= 1 && m.A.rows() == m.A.cols(), "A must be square and nonempty");
  const Eigen::Index nx = m.A.rows();
  expect(m.B.rows() == nx && m.B.cols() >= 1, "B must be nx x nu");
  const Eigen::Index nu = m.B.cols();
  expect(m.Q.rows() == nx && m.Q.cols() == nx, "Q must be nx x nx");
  expect(m.R.rows() == nu && m.R.cols() == nu, "R must be nu x nu");
  if (!lq_only) {
    expect(m.W.rows() == nx && m.W.cols() == nx, "W must be nx x nx");
    expect(m.C.rows() >= 1 && m.C.cols() == nx, "C must be ny x nx");
    expect(m.x_ref.size() == nx, "x_ref must have length nx");
    expect(m.u_ref.size() == nu, "u_ref must have length nu");
    expect(m.K.rows() == nu && m.K.cols() == nx, "K must be nu x nx");
  }
  if (bad.tellp() > 0) throw DimensionMismatch("validate: " + bad.str());
}

double min_eigenvalue(const Mat& M) {
  Eigen::SelfAdjointEigenSolver<Mat> es(M, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double asymmetry(const Mat& M) {
  return (M - M.transpose()).cwiseAbs().maxCoeff();
}

ValidationCheck check_psd(const std::string& name, const Mat& M, bool strict) {
  ValidationCheck c{name, false, 0.0, ""};
  if (!is_symmetric(M, 1e-12)) {
    c.measured = asymmetry(M);
    c.detail = "not symmetric (max |M - M'|)";
    return c;
  }
  const double tol = 1e-12 * std::max(1.0, M.cwiseAbs().maxCoeff());
  c.measured = min_eigenvalue(M);
  c.pass = strict ? (c.measured > tol) : (c.measured >= -tol);
  c.detail = "min eigenvalue";
  return c;
}

Eigen::Index numerical_rank(const Mat& M) {
  Eigen::JacobiSVD<Mat> svd(M);
  const Vec s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  // Rank threshold relative to the largest singular value.
  return (s.array() > 1e-9 * s(0)).count();
}

}  // namespace

bool ValidationReport::ok() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const ValidationCheck& c) { return c.pass; });
}

const ValidationCheck* ValidationReport::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

std::string ValidationReport::failures() const {
  std::string out;
  for (const auto& c : checks) {
    if (c.pass) continue;
    if (!out.empty()) out += ", ";
    out += c.name;
  }
  return out;
}

ValidationReport validate(const SystemModel& m) {
  check_shapes(m);
  const Eigen::Index nx = m.nx();
  ValidationReport rep;

  rep.checks.push_back({"gamma_in_unit_interval", m.gamma > 0.0 && m.gamma < 1.0,
                        m.gamma, "discount factor"});
  rep.checks.push_back({"threshold_positive", m.t > 0.0, m.t, "output threshold"});
  rep.checks.push_back({"budget_positive", m.e > 0.0, m.e, "risk budget"});
  rep.checks.push_back({"horizon_positive", m.N >= 1, double(m.N), "prediction horizon"});
  rep.checks.push_back(check_psd("W_symmetric_psd", m.W, /*strict=*/false));
  rep.checks.push_back(check_psd("Q_symmetric_psd", m.Q, /*strict=*/false));
  rep.checks.push_back(check_psd("R_symmetric_pd", m.R, /*strict=*/true));

  const double ss_resid =
      ((Mat::Identity(nx, nx) - m.A) * m.x_ref - m.B * m.u_ref).norm();
  rep.checks.push_back({"reference_steady_state", ss_resid <= 1e-9, ss_resid,
                        "|| (I - A) x_ref - B u_ref ||"});

  const double cx = (m.C * m.x_ref).norm();
  rep.checks.push_back({"reference_output_margin", cx < m.t, cx,
                        "|| C x_ref || (must be < t)"});

  const double rho = spectral_radius(m.A + m.B * m.K);
  rep.checks.push_back({"prediction_gain_stable", rho < 1.0, rho, "rho(A + B K)"});

  Mat ctrb(nx, nx * m.nu());
  Mat AiB = m.B;
  for (Eigen::Index i = 0; i < nx; ++i) {
    ctrb.middleCols(i * m.nu(), m.nu()) = AiB;
    AiB = (m.A * AiB).eval();
  }
  const Eigen::Index rc = numerical_rank(ctrb);
  rep.checks.push_back({"pair_controllable", rc == nx, double(rc),
                        "rank of the reachability matrix"});

  ValidationCheck obs{"pair_observable", false, 0.0, "rank of the observability matrix"};
  if (rep.find("Q_symmetric_psd")->pass) {
    const Mat Qh = psd_sqrt(m.Q);
    Mat obsv(nx * nx, nx);
    Mat QhAi = Qh;
    for (Eigen::Index i = 0; i < nx; ++i) {
      obsv.middleRows(i * nx, nx) = QhAi;
      QhAi = (QhAi * m.A).eval();
    }
    const Eigen::Index ro = numerical_rank(obsv);
    obs.pass = ro == nx;
    obs.measured = double(ro);
  } else {
    obs.detail = "skipped: Q^{1/2} unavailable";
  }
  rep.checks.push_back(obs);

  return rep;
}

LqSolution lq_gain(const SystemModel& m) {
  check_shapes(m, /*lq_only=*/true);
  constexpr int kCap = 10000;
  constexpr double kTol = 1e-12;
  Mat P = m.Q;
  int iters = kCap;
  for (int it = 1; it <= kCap; ++it) {
    const Mat BtPB = m.R + m.B.transpose() * P * m.B;
    const Mat BtPA = m.B.transpose() * P * m.A;
    Mat next =
        m.A.transpose() * P * m.A - BtPA.transpose() * solve_linear(BtPB, BtPA) + m.Q;
    next = 0.5 * (next + next.transpose()).eval();
    const double delta = (next - P).cwiseAbs().maxCoeff();
    P = std::move(next);
    if (delta < kTol) {
      iters = it;
      break;
    }
  }
  if (iters == kCap)
    throw RiccatiNonConvergence("lq_gain: no fixed point within 10000 iterations");

  const Mat BtPB = m.R + m.B.transpose() * P * m.B;
  const Mat BtPA = m.B.transpose() * P * m.A;
  LqSolution sol;
  sol.K_lq = -solve_linear(BtPB, BtPA);
  sol.P_dare = P;
  sol.iterations = iters;
  sol.residual = (m.A.transpose() * P * m.A -
                  BtPA.transpose() * solve_linear(BtPB, BtPA) + m.Q - P)
                     .cwiseAbs()
                     .maxCoeff();
  if (sol.residual > 1e-9)
    throw RiccatiNonConvergence("lq_gain: fixed point residual " +
                                std::to_string(sol.residual));
  if (spectral_radius(m.A + m.B * sol.K_lq) >= 1.0)
    throw RiccatiNonConvergence("lq_gain: closed loop not stable");
  return sol;
}

std::vector<double> equation_residuals(const SystemModel& m, const Precomputed& pre) {
  const double gN1 = std::pow(m.gamma, m.N + 1);
  const Mat r1 = pre.Phi.transpose() * pre.P * pre.Phi +
                 m.K.transpose() * m.R * m.K + m.Q - pre.P;
  const Mat r2 =
      m.gamma * pre.Phi.transpose() * pre.P_tilde * pre.Phi + pre.CtC - pre.P_tilde;
  const Mat r3 = m.gamma * pre.Phi * pre.S_tilde * pre.Phi.transpose() +
                 gN1 / (1.0 - m.gamma) * m.W +
                 std::pow(m.gamma, m.N) * pre.Xhat[size_t(m.N)] - pre.S_tilde;
  const Mat BtPB = m.R + m.B.transpose() * pre.P_dare * m.B;
  const Mat BtPA = m.B.transpose() * pre.P_dare * m.A;
  const Mat r4 = m.A.transpose() * pre.P_dare * m.A -
                 BtPA.transpose() * solve_linear(BtPB, BtPA) + m.Q - pre.P_dare;
  double r5 = pre.Xhat[0].cwiseAbs().maxCoeff();  // ladder starts at zero
  for (size_t i = 1; i < pre.Xhat.size(); ++i)
    r5 = std::max(r5, (pre.Phi * pre.Xhat[i - 1] * pre.Phi.transpose() + m.W -
                       pre.Xhat[i])
                          .cwiseAbs()
                          .maxCoeff());
  return {r1.cwiseAbs().maxCoeff(), r2.cwiseAbs().maxCoeff(),
          r3.cwiseAbs().maxCoeff(), r4.cwiseAbs().maxCoeff(), r5};
}

Precomputed precompute(const SystemModel& m) {
  const ValidationReport rep = validate(m);
  if (!rep.ok())
    throw std::invalid_argument("precompute: validation failed: " + rep.failures());

  const Eigen::Index nx = m.nx();
  const Eigen::Index nu = m.nu();
  const int N = m.N;
  const double t2 = m.t * m.t;
  const double gN = std::pow(m.gamma, N);

  Precomputed pre;
  pre.Phi = m.A + m.B * m.K;
  pre.CtC = m.C.transpose() * m.C;

  pre.Xhat.assign(size_t(N) + 1, Mat::Zero(nx, nx));
  pre.Phi_pow.assign(size_t(N) + 1, Mat::Identity(nx, nx));
  pre.tr_ccx.assign(size_t(N) + 1, 0.0);
  for (int i = 1; i <= N; ++i) {
    Mat next = pre.Phi * pre.Xhat[size_t(i) - 1] * pre.Phi.transpose() + m.W;
    pre.Xhat[size_t(i)] = 0.5 * (next + next.transpose());
    pre.Phi_pow[size_t(i)] = pre.Phi_pow[size_t(i) - 1] * pre.Phi;
    pre.tr_ccx[size_t(i)] = (pre.CtC * pre.Xhat[size_t(i)]).trace();
  }

  pre.P = solve_discounted_lyapunov(
      pre.Phi, m.Q + m.K.transpose() * m.R * m.K, 1.0);
  pre.P_tilde = solve_discounted_lyapunov(pre.Phi, pre.CtC, m.gamma);
  const Mat S_rhs = std::pow(m.gamma, N + 1) / (1.0 - m.gamma) * m.W +
                    gN * pre.Xhat[size_t(N)];
  pre.S_tilde =
      solve_discounted_lyapunov(pre.Phi.transpose(), S_rhs, m.gamma);

  const LqSolution lq = lq_gain(m);
  pre.K_lq = lq.K_lq;
  pre.P_dare = lq.P_dare;
  pre.trWP = (m.W * pre.P).trace();

  const auto residuals = equation_residuals(m, pre);
  pre.equation_residual = *std::max_element(residuals.begin(), residuals.end());
  if (pre.equation_residual > 1e-9)
    throw LyapunovFailure("precompute: matrix equation residual " +
                          std::to_string(pre.equation_residual));

  // Terminal tail value around the reference.
  const Vec ctc_xr = pre.CtC * m.x_ref;
  const Mat I_gPhi_T = (Mat::Identity(nx, nx) - m.gamma * pre.Phi).transpose();
  pre.f_lin = (gN / t2) * solve_linear(I_gPhi_T, ctc_xr);
  pre.f_const = (pre.CtC * pre.S_tilde).trace() / t2 +
                gN * m.x_ref.dot(ctc_xr) / ((1.0 - m.gamma) * t2);

  double noise = 0.0;
  for (int i = 0; i < N; ++i) {
    const Mat PWP = pre.Phi_pow[size_t(i)] * m.W * pre.Phi_pow[size_t(i)].transpose();
    noise += std::pow(m.gamma, i) * (pre.CtC * PWP).trace();
  }
  noise += gN * (pre.P_tilde * pre.Phi_pow[size_t(N)] * m.W *
                 pre.Phi_pow[size_t(N)].transpose())
                    .trace();
  pre.expected_noise_term = noise / t2;

  // Prediction operators for the means x̄_i = Aⁱ x + Σ_{j<i} A^{i−1−j} B m_j.
  pre.Gamma_pred = Mat::Zero(N * nx, nx);
  pre.Theta_pred = Mat::Zero(N * nx, N * nu);
  {
    std::vector<Mat> Apow(size_t(N) + 1, Mat::Identity(nx, nx));
    for (int i = 1; i <= N; ++i) Apow[size_t(i)] = Apow[size_t(i) - 1] * m.A;
    for (int i = 1; i <= N; ++i) {
      pre.Gamma_pred.middleRows((i - 1) * nx, nx) = Apow[size_t(i)];
      for (int j = 0; j < i; ++j)
        pre.Theta_pred.block((i - 1) * nx, j * nu, nx, nu) =
            Apow[size_t(i - 1 - j)] * m.B;
    }
  }

  // Condensed cost: stage weights Q for i = 1..N−1, P at i = N, R on inputs.
  Mat Qbar = Mat::Zero(N * nx, N * nx);
  for (int i = 1; i < N; ++i)
    Qbar.block((i - 1) * nx, (i - 1) * nx, nx, nx) = m.Q;
  Qbar.block((N - 1) * nx, (N - 1) * nx, nx, nx) = pre.P;
  Mat Rbar = Mat::Zero(N * nu, N * nu);
  for (int i = 0; i < N; ++i) Rbar.block(i * nu, i * nu, nu, nu) = m.R;
  Vec Xref(N * nx), Uref(N * nu);
  for (int i = 0; i < N; ++i) {
    Xref.segment(i * nx, nx) = m.x_ref;
    Uref.segment(i * nu, nu) = m.u_ref;
  }

  pre.H = pre.Theta_pred.transpose() * Qbar * pre.Theta_pred + Rbar;
  pre.H = 0.5 * (pre.H + pre.H.transpose()).eval();
  pre.h_state = pre.Theta_pred.transpose() * Qbar * pre.Gamma_pred;
  pre.h_const = -pre.Theta_pred.transpose() * Qbar * Xref - Rbar * Uref;
  pre.j0_quad = m.Q + pre.Gamma_pred.transpose() * Qbar * pre.Gamma_pred;
  pre.j0_lin = -(m.Q * m.x_ref + pre.Gamma_pred.transpose() * Qbar * Xref);
  pre.j0_const = m.x_ref.dot(m.Q * m.x_ref) + Xref.dot(Qbar * Xref) +
                 Uref.dot(Rbar * Uref);

  // Condensed risk: discounted output weights γⁱCᵀC/t² for i = 1..N−1 and
  // the terminal weight γᴺ P̃/t², plus the linear term from the tail value.
  const Mat M_N = (gN / t2) * pre.P_tilde;
  Mat Mq = Mat::Zero(N * nx, N * nx);
  for (int i = 1; i < N; ++i)
    Mq.block((i - 1) * nx, (i - 1) * nx, nx, nx) =
        (std::pow(m.gamma, i) / t2) * pre.CtC;
  Mq.block((N - 1) * nx, (N - 1) * nx, nx, nx) = M_N;
  Vec w = Vec::Zero(N * nx);
  w.segment((N - 1) * nx, nx) = pre.f_lin - M_N * m.x_ref;

  pre.G = pre.Theta_pred.transpose() * Mq * pre.Theta_pred;
  pre.G = 0.5 * (pre.G + pre.G.transpose()).eval();
  pre.g_state = pre.Theta_pred.transpose() * Mq * pre.Gamma_pred;
  pre.g_const = pre.Theta_pred.transpose() * w;
  pre.c0_quad = pre.CtC / t2 + pre.Gamma_pred.transpose() * Mq * pre.Gamma_pred;
  pre.c0_lin = pre.Gamma_pred.transpose() * w;
  double stage_traces = 0.0;
  for (int i = 0; i < N; ++i)
    stage_traces += std::pow(m.gamma, i) * pre.tr_ccx[size_t(i)] / t2;
  pre.const_part = stage_traces + pre.f_const + m.x_ref.dot(M_N * m.x_ref) -
                   2.0 * pre.f_lin.dot(m.x_ref);

  return pre;
}

double lq_output_bound(const SystemModel& m, const Vec& x0) {
  if (x0.size() != m.nx())
    throw DimensionMismatch("lq_output_bound: x0 must have length nx");
  const LqSolution lq = lq_gain(m);
  const Mat Phi_lq = m.A + m.B * lq.K_lq;
  const Mat CtC = m.C.transpose() * m.C;
  const Mat Pt_lq = solve_discounted_lyapunov(Phi_lq, CtC, m.gamma);
  const double t2 = m.t * m.t;
  const Eigen::Index nx = m.nx();
  const Vec d = x0 - m.x_ref;
  const Vec cross =
      solve_linear(Mat(Mat::Identity(nx, nx) - m.gamma * Phi_lq), d);
  const double mean_part = d.dot(Pt_lq * d) +
                           (m.C * m.x_ref).squaredNorm() / (1.0 - m.gamma) +
                           2.0 * m.x_ref.dot(CtC * cross);
  const double noise_part = m.gamma / (1.0 - m.gamma) * (m.W * Pt_lq).trace();
  return (mean_part + noise_part) / t2;
}

}  // namespace dsmpc
