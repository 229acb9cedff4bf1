#include "dsmpc/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>

namespace dsmpc {

namespace {

Eigen::PartialPivLU<Mat> factorize_checked(const Mat& M, double pivot_tol) {
  if (M.rows() != M.cols())
    throw DimensionMismatch("solve_linear: matrix is " + std::to_string(M.rows()) +
                            "x" + std::to_string(M.cols()) + ", expected square");
  Eigen::PartialPivLU<Mat> lu(M);
  const Vec pivots = lu.matrixLU().diagonal().cwiseAbs();
  const double largest = pivots.size() ? pivots.maxCoeff() : 0.0;
  if (largest == 0.0 || pivots.minCoeff() < pivot_tol * largest)
    throw SingularMatrix("solve_linear: pivot below threshold " +
                         std::to_string(pivot_tol));
  return lu;
}

}  // namespace

Vec solve_linear(const Mat& M, const Vec& b, double pivot_tol) {
  if (b.size() != M.rows())
    throw DimensionMismatch("solve_linear: rhs length does not match matrix");
  return factorize_checked(M, pivot_tol).solve(b);
}

Mat solve_linear(const Mat& M, const Mat& B, double pivot_tol) {
  if (B.rows() != M.rows())
    throw DimensionMismatch("solve_linear: rhs rows do not match matrix");
  return factorize_checked(M, pivot_tol).solve(B);
}

Mat cholesky(const Mat& M, double pivot_tol) {
  if (M.rows() != M.cols())
    throw DimensionMismatch("cholesky: matrix must be square");
  if (!is_symmetric(M, 1e-12))
    throw NotPositiveDefinite("cholesky: matrix is not symmetric");
  const Eigen::Index n = M.rows();
  const double scale = std::max(1.0, n ? M.diagonal().cwiseAbs().maxCoeff() : 1.0);
  Mat L = Mat::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = M(j, j) - L.row(j).head(j).squaredNorm();
    if (d <= pivot_tol * scale)
      throw NotPositiveDefinite("cholesky: pivot " + std::to_string(d) +
                                " at column " + std::to_string(j));
    L(j, j) = std::sqrt(d);
    for (Eigen::Index i = j + 1; i < n; ++i)
      L(i, j) = (M(i, j) - L.row(i).head(j).dot(L.row(j).head(j))) / L(j, j);
  }
  return L;
}

Mat cholesky_psd(const Mat& M, double zero_tol) {
  if (M.rows() != M.cols())
    throw DimensionMismatch("cholesky_psd: matrix must be square");
  if (!is_symmetric(M, 1e-12))
    throw NotPositiveDefinite("cholesky_psd: matrix is not symmetric");
  const Eigen::Index n = M.rows();
  const double scale = std::max(1.0, n ? M.diagonal().cwiseAbs().maxCoeff() : 1.0);
  Mat L = Mat::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = M(j, j) - L.row(j).head(j).squaredNorm();
    if (d < -zero_tol * scale)
      throw NotPositiveDefinite("cholesky_psd: negative pivot " + std::to_string(d));
    if (d <= zero_tol * scale) {
      // Rank-deficient column: the remaining column must vanish too,
      // otherwise M was indefinite.
      for (Eigen::Index i = j + 1; i < n; ++i) {
        const double r = M(i, j) - L.row(i).head(j).dot(L.row(j).head(j));
        if (std::abs(r) > std::sqrt(zero_tol) * scale)
          throw NotPositiveDefinite("cholesky_psd: matrix is indefinite");
      }
      continue;
    }
    L(j, j) = std::sqrt(d);
    for (Eigen::Index i = j + 1; i < n; ++i)
      L(i, j) = (M(i, j) - L.row(i).head(j).dot(L.row(j).head(j))) / L(j, j);
  }
  return L;
}

double spectral_radius(const Mat& M) {
  if (M.rows() != M.cols())
    throw DimensionMismatch("spectral_radius: matrix must be square");
  if (M.rows() == 0) return 0.0;
  if (is_symmetric(M, 1e-12)) {
    Eigen::SelfAdjointEigenSolver<Mat> es(M, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
      throw NonConvergence("spectral_radius: eigenvalue iteration failed");
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
  Eigen::EigenSolver<Mat> es(M, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success)
    throw NonConvergence("spectral_radius: eigenvalue iteration failed");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

Mat kron(const Mat& A, const Mat& B, int dim_cap) {
  const Eigen::Index rows = A.rows() * B.rows();
  const Eigen::Index cols = A.cols() * B.cols();
  if (rows > dim_cap || cols > dim_cap)
    throw DimensionOverflow("kron: result would be " + std::to_string(rows) + "x" +
                            std::to_string(cols) + ", cap is " +
                            std::to_string(dim_cap));
  Mat out(rows, cols);
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return out;
}

Mat solve_discounted_lyapunov(const Mat& F, const Mat& Q, double discount,
                              int dim_cap) {
  if (F.rows() != F.cols())
    throw DimensionMismatch("solve_discounted_lyapunov: F must be square");
  if (Q.rows() != F.rows() || Q.cols() != F.cols())
    throw DimensionMismatch("solve_discounted_lyapunov: Q must match F");
  const Eigen::Index n = F.rows();
  const bool sym_rhs = is_symmetric(Q, 1e-12);

  if (n * n <= dim_cap) {
    // Column-major vec identity: vec(FᵀXF) = (Fᵀ ⊗ Fᵀ) vec(X).
    const Mat Ft = F.transpose();
    Mat system = Mat::Identity(n * n, n * n) - discount * kron(Ft, Ft, dim_cap);
    Mat X(n, n);
    try {
      Eigen::Map<Vec>(X.data(), n * n) =
          solve_linear(system, Vec(Eigen::Map<const Vec>(Q.data(), n * n)));
    } catch (const SingularMatrix&) {
      throw LyapunovFailure(
          "solve_discounted_lyapunov: Kronecker system is singular "
          "(discount * rho(F)^2 >= 1?)");
    }
    if (sym_rhs) X = 0.5 * (X + X.transpose()).eval();
    return X;
  }

  // Fixed-point fallback for large state dimensions.
  Mat X = Q;
  for (int it = 0; it < kLyapunovIterCap; ++it) {
    Mat next = discount * F.transpose() * X * F + Q;
    if (sym_rhs) next = 0.5 * (next + next.transpose()).eval();
    const double delta = (next - X).cwiseAbs().maxCoeff();
    X = std::move(next);
    if (delta < kFixedPointTol) return X;
  }
  throw NonConvergence("solve_discounted_lyapunov: fixed point exceeded " +
                       std::to_string(kLyapunovIterCap) + " iterations");
}

Mat matrix_power(const Mat& M, int p) {
  if (M.rows() != M.cols())
    throw DimensionMismatch("matrix_power: matrix must be square");
  if (p < 0) throw DimensionMismatch("matrix_power: exponent must be >= 0");
  Mat out = Mat::Identity(M.rows(), M.cols());
  for (int i = 0; i < p; ++i) out = (out * M).eval();
  return out;
}

Mat psd_sqrt(const Mat& M, double tol) {
  if (!is_symmetric(M, 1e-12))
    throw NotPositiveDefinite("psd_sqrt: matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(M);
  if (es.info() != Eigen::Success)
    throw NonConvergence("psd_sqrt: eigenvalue iteration failed");
  Vec ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.size() ? ev.cwiseAbs().maxCoeff() : 1.0);
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < -tol * scale)
      throw NotPositiveDefinite("psd_sqrt: eigenvalue " + std::to_string(ev(i)));
    ev(i) = std::sqrt(std::max(ev(i), 0.0));
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

bool is_symmetric(const Mat& M, double tol) {
  if (M.rows() != M.cols()) return false;
  if (M.rows() == 0) return true;
  return (M - M.transpose()).cwiseAbs().maxCoeff() <= tol;
}

}  // namespace dsmpc
