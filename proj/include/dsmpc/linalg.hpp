#pragma once

#include <Eigen/Dense>

#include "dsmpc/errors.hpp"

namespace dsmpc {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Pivot threshold below which a linear solve is declared singular.
inline constexpr double kSingularPivotTol = 1e-12;

/// Cholesky pivot threshold; a diagonal pivot at or below this throws.
inline constexpr double kCholeskyPivotTol = 1e-14;

/// Largest row or column count a Kronecker lift may produce.
inline constexpr int kKronDimCap = 4096;

/// Elementwise tolerance and iteration cap for fixed-point matrix
/// iterations (Lyapunov fallback, Riccati).
inline constexpr double kFixedPointTol = 1e-12;
inline constexpr int kLyapunovIterCap = 100000;

/// Solves M x = b by partially pivoted LU.
/// Throws SingularMatrix when any pivot magnitude falls below pivot_tol
/// (relative to the largest pivot), DimensionMismatch on bad shapes.
Vec solve_linear(const Mat& M, const Vec& b, double pivot_tol = kSingularPivotTol);

/// Multi right-hand-side variant; one factorization, B column-wise.
Mat solve_linear(const Mat& M, const Mat& B, double pivot_tol = kSingularPivotTol);

/// Lower-triangular Cholesky factor L with M = L Lᵀ.
/// M must be symmetric to 1e-12; throws NotPositiveDefinite when a pivot
/// is ≤ pivot_tol · max(1, max diagonal).
Mat cholesky(const Mat& M, double pivot_tol = kCholeskyPivotTol);

/// Cholesky of a positive *semi*definite matrix: zero pivots yield zero
/// columns in L, so rank-deficient covariances (including W = 0) factor
/// exactly. Throws NotPositiveDefinite if M is indefinite.
Mat cholesky_psd(const Mat& M, double zero_tol = 1e-12);

/// Largest eigenvalue magnitude, accurate to 1e-8.
/// Throws NonConvergence if the eigenvalue iteration fails.
double spectral_radius(const Mat& M);

/// Kronecker product A ⊗ B. Throws DimensionOverflow when the result
/// would have more than dim_cap rows or columns.
Mat kron(const Mat& A, const Mat& B, int dim_cap = kKronDimCap);

/// Solves the discounted Lyapunov equation
///   X = discount · Fᵀ X F + Q
/// directly through the Kronecker system (I − discount·Fᵀ⊗Fᵀ) vec(X) = vec(Q).
/// When the lift exceeds dim_cap, falls back to the fixed-point iteration
/// X ← discount·FᵀXF + Q (tolerance kFixedPointTol, cap kLyapunovIterCap).
/// Requires discount · ρ(F)² < 1 for a solution to exist; a singular
/// Kronecker system throws LyapunovFailure, an exhausted fixed point
/// throws NonConvergence. The result is symmetrized when Q is symmetric.
Mat solve_discounted_lyapunov(const Mat& F, const Mat& Q, double discount,
                              int dim_cap = kKronDimCap);

/// M^p for integer p ≥ 0 by repeated multiplication.
Mat matrix_power(const Mat& M, int p);

/// Symmetric PSD square root by eigendecomposition; eigenvalues in
/// [−tol·scale, 0) are clamped to zero, anything lower throws
/// NotPositiveDefinite.
Mat psd_sqrt(const Mat& M, double tol = 1e-10);

/// True when ‖M − Mᵀ‖_max ≤ tol.
bool is_symmetric(const Mat& M, double tol = 1e-12);

}  // namespace dsmpc
