#include <cmath>
#include <random>

#include "doctest.h"
#include "dsmpc/linalg.hpp"
#include "testutil.hpp"

using dsmpc::Mat;
using dsmpc::Vec;

TEST_SUITE_BEGIN("linalg");

TEST_CASE("solve_linear handles identity and diagonal systems") {
  const Vec b{{3.0, 4.0}};
  CHECK((dsmpc::solve_linear(Mat::Identity(2, 2), b) - b).norm() == 0.0);

  const Mat D{{2.0, 0.0}, {0.0, 4.0}};
  const Vec x = dsmpc::solve_linear(D, Vec{{2.0, 8.0}});
  CHECK(x(0) == doctest::Approx(1.0));
  CHECK(x(1) == doctest::Approx(2.0));
}

TEST_CASE("solve_linear round-trips random well-conditioned systems") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat M = testutil::random_mat(rng, 5, 5) + 3.0 * Mat::Identity(5, 5);
    const Vec x_true = testutil::random_vec(rng, 5);
    const Vec x = dsmpc::solve_linear(M, Vec(M * x_true));
    CHECK((x - x_true).norm() <= 1e-9 * x_true.norm());
  }
}

TEST_CASE("solve_linear rejects singular matrices") {
  Mat S(2, 2);
  S << 1.0, 2.0, 2.0, 4.0;
  CHECK_THROWS_AS(dsmpc::solve_linear(S, Vec{{1.0, 1.0}}), dsmpc::SingularMatrix);
  CHECK_THROWS_AS(dsmpc::solve_linear(Mat::Ones(2, 3), Vec{{1.0, 1.0}}),
                  dsmpc::DimensionMismatch);
}

TEST_CASE("cholesky factors scaled identities") {
  const Mat L = dsmpc::cholesky(4.0 * Mat::Identity(2, 2));
  CHECK((L - 2.0 * Mat::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-14);

  // the running example's disturbance covariance
  const Mat Lw = dsmpc::cholesky(0.2 * Mat::Identity(2, 2));
  CHECK((Lw - std::sqrt(0.2) * Mat::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("cholesky reconstructs random SPD matrices") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat G = testutil::random_mat(rng, 4, 4);
    const Mat M = G * G.transpose() + 1e-6 * Mat::Identity(4, 4);
    const Mat L = dsmpc::cholesky(M);
    CHECK((L * L.transpose() - M).cwiseAbs().maxCoeff() <= 1e-9);
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) CHECK(L(i, j) == 0.0);
  }
}

TEST_CASE("cholesky rejects indefinite input, cholesky_psd accepts semidefinite") {
  Mat M(2, 2);
  M << 1.0, 0.0, 0.0, -0.5;
  CHECK_THROWS_AS(dsmpc::cholesky(M), dsmpc::NotPositiveDefinite);

  const Mat Z = Mat::Zero(3, 3);
  CHECK(dsmpc::cholesky_psd(Z).cwiseAbs().maxCoeff() == 0.0);

  Mat rank1(2, 2);
  rank1 << 1.0, 1.0, 1.0, 1.0;
  const Mat L = dsmpc::cholesky_psd(rank1);
  CHECK((L * L.transpose() - rank1).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK_THROWS_AS(dsmpc::cholesky_psd(M), dsmpc::NotPositiveDefinite);
}

TEST_CASE("spectral_radius matches hand-computed eigenvalues") {
  Mat D(2, 2);
  D << 0.5, 0.0, 0.0, -0.25;
  CHECK(dsmpc::spectral_radius(D) == doctest::Approx(0.5).epsilon(1e-8));

  // complex pair ±0.5i
  Mat Rot(2, 2);
  Rot << 0.0, 1.0, -0.25, 0.0;
  CHECK(dsmpc::spectral_radius(Rot) == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("spectral_radius of the example closed loop is stable") {
  const dsmpc::SystemModel m = testutil::example_model();
  const double rho = dsmpc::spectral_radius(m.A + m.B * m.K);
  CHECK(rho < 1.0);
  CHECK(rho == doctest::Approx(0.9192501954142382).epsilon(1e-10));
  // eigenvalues of the open-loop A: trace 1.5, determinant -2.5 => {2.5, -1}
  CHECK(dsmpc::spectral_radius(m.A) == doctest::Approx(2.5).epsilon(1e-10));
}

TEST_CASE("spectral_radius scales homogeneously") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Mat M = testutil::random_mat(rng, 4, 4);
    const double c = -2.5;
    CHECK(dsmpc::spectral_radius(c * M) ==
          doctest::Approx(std::abs(c) * dsmpc::spectral_radius(M)).epsilon(1e-8));
  }
}

TEST_CASE("kron reproduces small hand cases") {
  CHECK((dsmpc::kron(Mat::Identity(2, 2), Mat::Identity(2, 2)) - Mat::Identity(4, 4))
            .cwiseAbs()
            .maxCoeff() == 0.0);

  Mat a(1, 2), b(2, 1);
  a << 1.0, 2.0;
  b << 3.0, 4.0;
  Mat expect(2, 2);
  expect << 3.0, 6.0, 4.0, 8.0;
  CHECK((dsmpc::kron(a, b) - expect).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("kron satisfies the mixed-product property") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const Mat A = testutil::random_mat(rng, 2, 2);
    const Mat B = testutil::random_mat(rng, 2, 2);
    const Vec x = testutil::random_vec(rng, 2);
    const Vec y = testutil::random_vec(rng, 2);
    Vec xy(4);
    xy << x(0) * y, x(1) * y;
    Vec AxBy(4);
    const Vec Ax = A * x, By = B * y;
    AxBy << Ax(0) * By, Ax(1) * By;
    CHECK((dsmpc::kron(A, B) * xy - AxBy).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("kron enforces the dimension cap") {
  CHECK_THROWS_AS(dsmpc::kron(Mat::Identity(100, 100), Mat::Identity(100, 100)),
                  dsmpc::DimensionOverflow);
}

TEST_CASE("solve_discounted_lyapunov matches the defining series") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    Mat F = testutil::random_mat(rng, 3, 3);
    F *= 0.8 / std::max(1.0, dsmpc::spectral_radius(F));
    const Mat Q = testutil::random_spd(rng, 3, 0.1, 1.0);
    const double disc = 0.9;

    const Mat X = dsmpc::solve_discounted_lyapunov(F, Q, disc);
    CHECK((X - disc * F.transpose() * X * F - Q).cwiseAbs().maxCoeff() <= 1e-11);

    // series oracle: X = sum disc^i (F^T)^i Q F^i
    Mat S = Mat::Zero(3, 3);
    Mat Fi = Mat::Identity(3, 3);
    for (int i = 0; i < 400; ++i) {
      S += std::pow(disc, i) * Fi.transpose() * Q * Fi;
      Fi = Fi * F;
    }
    CHECK((X - S).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("solve_discounted_lyapunov falls back past the Kronecker cap") {
  std::mt19937_64 rng(6);
  Mat F = testutil::random_mat(rng, 3, 3);
  F *= 0.5 / std::max(1.0, dsmpc::spectral_radius(F));
  const Mat Q = testutil::random_spd(rng, 3, 0.1, 1.0);
  const Mat direct = dsmpc::solve_discounted_lyapunov(F, Q, 1.0);
  const Mat fallback = dsmpc::solve_discounted_lyapunov(F, Q, 1.0, /*dim_cap=*/2);
  CHECK((direct - fallback).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("matrix_power and psd_sqrt behave on basics") {
  Mat A(2, 2);
  A << 1.0, 1.0, 0.0, 1.0;
  CHECK((dsmpc::matrix_power(A, 0) - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(dsmpc::matrix_power(A, 3)(0, 1) == doctest::Approx(3.0));

  std::mt19937_64 rng(7);
  const Mat M = testutil::random_spd(rng, 3, 0.0, 2.0);
  const Mat S = dsmpc::psd_sqrt(M);
  CHECK((S * S - M).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_SUITE_END();
