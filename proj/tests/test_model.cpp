#include <cmath>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "dsmpc/linalg.hpp"
#include "dsmpc/model.hpp"
#include "dsmpc/model_io.hpp"
#include "testutil.hpp"

using dsmpc::Mat;
using dsmpc::Vec;

namespace {

/// 1-state plant with K chosen so the closed loop is deadbeat (Phi = 0).
dsmpc::SystemModel deadbeat_model() {
  dsmpc::SystemModel m;
  m.A = Mat{{1.0}};
  m.B = Mat{{1.0}};
  m.K = Mat{{-1.0}};
  m.W = Mat{{0.3}};
  m.C = Mat{{1.0}};
  m.Q = Mat{{1.0}};
  m.R = Mat{{1.0}};
  m.x_ref = Vec{{0.0}};
  m.u_ref = Vec{{0.0}};
  m.t = 1.0;
  m.e = 1.0;
  m.gamma = 0.9;
  m.N = 3;
  return m;
}

}  // namespace

TEST_SUITE_BEGIN("model");

TEST_CASE("validate passes the running example and reports witnesses") {
  const dsmpc::SystemModel m = testutil::example_model();
  const dsmpc::ValidationReport rep = dsmpc::validate(m);
  CHECK(rep.ok());
  REQUIRE(rep.find("prediction_gain_stable") != nullptr);
  CHECK(rep.find("prediction_gain_stable")->measured ==
        doctest::Approx(0.9192501954142382));
  CHECK(rep.find("pair_controllable") != nullptr);
  CHECK(rep.find("pair_observable") != nullptr);
  CHECK(rep.find("reference_steady_state")->measured <= 1e-9);
}

TEST_CASE("validate fails on a boundary discount factor") {
  dsmpc::SystemModel m = testutil::example_model();
  m.gamma = 1.0;
  const dsmpc::ValidationReport rep = dsmpc::validate(m);
  CHECK(!rep.ok());
  REQUIRE(rep.find("gamma_in_unit_interval") != nullptr);
  CHECK(!rep.find("gamma_in_unit_interval")->pass);
}

TEST_CASE("validate fails when the prediction gain leaves the plant unstable") {
  dsmpc::SystemModel m = testutil::example_model();
  m.K = Mat::Zero(1, 2);
  const dsmpc::ValidationReport rep = dsmpc::validate(m);
  CHECK(!rep.ok());
  REQUIRE(rep.find("prediction_gain_stable") != nullptr);
  CHECK(!rep.find("prediction_gain_stable")->pass);
  // with K = 0 the measured radius is the open-loop one: 2.5
  CHECK(rep.find("prediction_gain_stable")->measured == doctest::Approx(2.5));
}

TEST_CASE("validate throws on inconsistent shapes before any check") {
  dsmpc::SystemModel m = testutil::example_model();
  m.B = Mat::Ones(3, 1);
  CHECK_THROWS_AS(dsmpc::validate(m), dsmpc::DimensionMismatch);
}

TEST_CASE("precompute reproduces the expected stage-cost floor") {
  const dsmpc::SystemModel m = testutil::example_model();
  const dsmpc::Precomputed pre = dsmpc::precompute(m);
  CHECK(std::abs(pre.trWP - 0.5304) <= 5e-4);
  // pinned full-precision value for regression
  CHECK(pre.trWP == doctest::Approx(0.5303887260787796).epsilon(1e-12));
  CHECK(pre.equation_residual <= 1e-9);
}

TEST_CASE("precompute satisfies its matrix-equation invariants") {
  const dsmpc::SystemModel m = testutil::example_model();
  const dsmpc::Precomputed pre = dsmpc::precompute(m);

  const Mat KtRK = m.K.transpose() * m.R * m.K;
  CHECK((pre.P - pre.Phi.transpose() * pre.P * pre.Phi - KtRK - m.Q)
            .cwiseAbs()
            .maxCoeff() <= 1e-9);
  CHECK((pre.P_tilde - m.gamma * pre.Phi.transpose() * pre.P_tilde * pre.Phi -
         m.C.transpose() * m.C)
            .cwiseAbs()
            .maxCoeff() <= 1e-9);
  const Mat tail = std::pow(m.gamma, m.N + 1) / (1.0 - m.gamma) * m.W +
                   std::pow(m.gamma, m.N) * pre.Xhat.back();
  CHECK((pre.S_tilde - m.gamma * pre.Phi * pre.S_tilde * pre.Phi.transpose() - tail)
            .cwiseAbs()
            .maxCoeff() <= 1e-9);

  // ladder recursion holds to round-off (entries are re-symmetrized), PSD
  for (size_t i = 0; i + 1 < pre.Xhat.size(); ++i) {
    CHECK((pre.Xhat[i + 1] - pre.Phi * pre.Xhat[i] * pre.Phi.transpose() - m.W)
              .cwiseAbs()
              .maxCoeff() <= 1e-12);
    CHECK_NOTHROW(dsmpc::cholesky_psd(pre.Xhat[i + 1]));
  }
  CHECK(pre.Xhat.front().cwiseAbs().maxCoeff() == 0.0);

  CHECK_NOTHROW(dsmpc::cholesky(pre.P));
  CHECK_NOTHROW(dsmpc::cholesky(pre.P_tilde));
  CHECK_NOTHROW(dsmpc::cholesky_psd(pre.S_tilde));
}

TEST_CASE("precompute collapses for a deadbeat prediction gain") {
  const dsmpc::SystemModel m = deadbeat_model();
  REQUIRE(dsmpc::validate(m).ok());
  const dsmpc::Precomputed pre = dsmpc::precompute(m);
  CHECK(pre.Phi.cwiseAbs().maxCoeff() <= 1e-15);
  // P = Q + K^T R K, Xhat[i] = W for i >= 1
  CHECK(pre.P(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  for (int i = 1; i <= m.N; ++i)
    CHECK(pre.Xhat[size_t(i)](0, 0) == doctest::Approx(0.3).epsilon(1e-14));
}

TEST_CASE("tail covariance matches its truncated series") {
  const dsmpc::SystemModel m = testutil::example_model();
  const dsmpc::Precomputed pre = dsmpc::precompute(m);
  const int M = testutil::tail_horizon(m.gamma);
  const std::vector<Mat> X = testutil::ladder_oracle(m, M);
  Mat S = Mat::Zero(m.nx(), m.nx());
  for (int i = m.N; i <= M; ++i) S += std::pow(m.gamma, i) * X[size_t(i)];
  CHECK((S - pre.S_tilde).cwiseAbs().maxCoeff() <= 1e-8);

  // trace pairing used by the terminal tail
  double tr = 0.0;
  const Mat CtC = m.C.transpose() * m.C;
  for (int i = m.N; i <= M; ++i) tr += std::pow(m.gamma, i) * (CtC * X[size_t(i)]).trace();
  CHECK(tr == doctest::Approx((CtC * pre.S_tilde).trace()).epsilon(1e-8));
}

TEST_CASE("discounted output energy matches the defining series") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const dsmpc::SystemModel m = testutil::random_stable_model(rng);
    const dsmpc::Precomputed pre = dsmpc::precompute(m);
    const Mat Phi = m.A + m.B * m.K;
    const int M = testutil::tail_horizon(m.gamma, 1e-14);
    const Vec v = testutil::random_vec(rng, int(m.nx()));
    double series = 0.0;
    Vec w = v;
    for (int i = 0; i <= M; ++i) {
      series += std::pow(m.gamma, i) * (m.C * w).squaredNorm();
      w = Phi * w;
    }
    CHECK(v.dot(pre.P_tilde * v) == doctest::Approx(series).epsilon(1e-8));
  }
}

TEST_CASE("lq_gain solves the scalar Riccati equation analytically") {
  dsmpc::SystemModel m;
  m.A = Mat{{0.5}};
  m.B = Mat{{1.0}};
  m.Q = Mat{{1.0}};
  m.R = Mat{{1.0}};
  const dsmpc::LqSolution lq = dsmpc::lq_gain(m);
  // fixed point of p = 0.25 p - 0.25 p^2/(1+p) + 1  =>  p^2 - 0.25 p - 1 = 0
  const double p_star = 0.125 + std::sqrt(0.015625 + 1.0);
  CHECK(lq.P_dare(0, 0) == doctest::Approx(p_star).epsilon(1e-12));
  CHECK(lq.K_lq(0, 0) == doctest::Approx(-0.5 * p_star / (1.0 + p_star)).epsilon(1e-12));
  CHECK(lq.residual <= 1e-12);
}

TEST_CASE("lq_gain is trivial for a memoryless plant") {
  dsmpc::SystemModel m;
  m.A = Mat::Zero(2, 2);
  m.B = Mat{{1.0, 0.0}, {0.0, 1.0}};
  m.Q = Mat::Identity(2, 2);
  m.R = Mat::Identity(2, 2);
  const dsmpc::LqSolution lq = dsmpc::lq_gain(m);
  CHECK((lq.P_dare - m.Q).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(lq.K_lq.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("lq_gain stabilizes the running example") {
  const dsmpc::SystemModel m = testutil::example_model();
  const dsmpc::LqSolution lq = dsmpc::lq_gain(m);
  CHECK(dsmpc::spectral_radius(m.A + m.B * lq.K_lq) < 1.0);
  CHECK(lq.K_lq(0, 0) == doctest::Approx(-0.82793441).epsilon(1e-6));
  CHECK(lq.K_lq(0, 1) == doctest::Approx(-0.80152225).epsilon(1e-6));
  // the example's prediction gain sits near (but not at) the LQ gain
  CHECK((m.K - lq.K_lq).cwiseAbs().maxCoeff() < 0.1);

  // certainty-equivalence cross-check: at K = K_lq the cost-to-go equation
  // reproduces the Riccati fixed point
  dsmpc::SystemModel mlq = m;
  mlq.K = lq.K_lq;
  const dsmpc::Precomputed pre = dsmpc::precompute(mlq);
  CHECK((pre.P - lq.P_dare).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("prediction operators reproduce the nominal recursion") {
  std::mt19937_64 rng(12);
  const dsmpc::SystemModel m = testutil::example_model();
  const dsmpc::Precomputed pre = dsmpc::precompute(m);
  for (int trial = 0; trial < 10; ++trial) {
    const Vec x = testutil::random_vec(rng, 2);
    const Vec mseq = testutil::random_vec(rng, m.N);
    const Vec stacked = pre.Gamma_pred * x + pre.Theta_pred * mseq;
    Vec xb = x;
    for (int i = 0; i < m.N; ++i) {
      xb = m.A * xb + m.B * mseq.segment(i, 1);
      CHECK((stacked.segment(2 * i, 2) - xb).cwiseAbs().maxCoeff() <=
            1e-10 * std::max(1.0, xb.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("equation_residuals stay below tolerance on the example") {
  const dsmpc::SystemModel m = testutil::example_model();
  const dsmpc::Precomputed pre = dsmpc::precompute(m);
  for (const double r : dsmpc::equation_residuals(m, pre)) CHECK(r <= 1e-9);
}

TEST_CASE("precompute rejects invalid models") {
  dsmpc::SystemModel m = testutil::example_model();
  m.gamma = 1.0;
  CHECK_THROWS_AS(dsmpc::precompute(m), std::invalid_argument);
}

TEST_CASE("lq_output_bound reproduces the example figure") {
  const dsmpc::SystemModel m = testutil::example_model();
  const double bound = dsmpc::lq_output_bound(m, testutil::example_x0());
  CHECK(std::abs(bound - 4.6998) <= 1e-3);
  CHECK(bound == doctest::Approx(4.699844574924788).epsilon(1e-10));
}

TEST_CASE("lq_output_bound degenerates to the stationary series") {
  dsmpc::SystemModel m = testutil::example_model();
  m.W = Mat::Zero(2, 2);
  const double bound = dsmpc::lq_output_bound(m, m.x_ref);
  const double expect = (m.C * m.x_ref).squaredNorm() / ((1.0 - m.gamma) * m.t * m.t);
  CHECK(bound == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("lq_output_bound matches its truncated series") {
  const dsmpc::SystemModel m = testutil::example_model();
  const Mat K_lq = dsmpc::lq_gain(m).K_lq;
  const int M = testutil::tail_horizon(m.gamma);
  const double series =
      testutil::lq_bound_series_oracle(m, K_lq, testutil::example_x0(), M);
  CHECK(dsmpc::lq_output_bound(m, testutil::example_x0()) ==
        doctest::Approx(series).epsilon(1e-8));
}

TEST_CASE("model JSON round-trips and defaults the prediction gain") {
  const dsmpc::SystemModel m = testutil::example_model();
  const std::string text = dsmpc::model_to_json_text(m);
  const dsmpc::SystemModel back = dsmpc::model_from_json_text(text);
  CHECK((back.A - m.A).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.K - m.K).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.N == m.N);
  CHECK(dsmpc::model_hash(back) == dsmpc::model_hash(m));

  // K omitted: the LQ gain is substituted before validation
  auto j = std::string(text);
  const auto pos = j.find("\"K\":");
  REQUIRE(pos != std::string::npos);
  const auto end = j.find("]]", pos);
  j.erase(pos, end + 3 - pos);
  const dsmpc::SystemModel defaulted = dsmpc::model_from_json_text(j);
  const Mat K_lq = dsmpc::lq_gain(m).K_lq;
  CHECK((defaulted.K - K_lq).cwiseAbs().maxCoeff() <= 1e-12);

  CHECK_THROWS_AS(dsmpc::model_from_json_text("{ not json"), dsmpc::ParseError);
  CHECK_THROWS_AS(dsmpc::model_from_json_text("{\"A\": [[1]]}"), dsmpc::ParseError);
}

TEST_SUITE_END();
