#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "nngpw/errors.hpp"
#include "nngpw/samples.hpp"

namespace nngpw {

inline constexpr double kPsdTolerance = 1e-10;

/// Eigen-decomposition with eigenvalues sorted in descending order.
struct SpectralDecomposition {
  Vector eigenvalues;
  Matrix eigenvectors;

  double largest() const { return eigenvalues.size() ? eigenvalues(0) : 0.0; }
  double smallest() const { return eigenvalues.size() ? eigenvalues(eigenvalues.size() - 1) : 0.0; }
};

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

inline SpectralDecomposition decompose(const Matrix& m) {
  require(m.rows() == m.cols(), "spectral decomposition needs a square matrix");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetrize(m));
  if (solver.info() != Eigen::Success) throw NotPsdError("eigen-decomposition did not converge");
  // Eigen returns ascending order.
  return {solver.eigenvalues().reverse(), solver.eigenvectors().rowwise().reverse()};
}

/// Throws NotPsdError when the smallest eigenvalue is below -tol * lambda_max.
inline void check_psd(const SpectralDecomposition& spectrum, double tol, const std::string& what) {
  const double scale = std::max(spectrum.largest(), 0.0);
  if (spectrum.smallest() < -tol * scale || (scale == 0.0 && spectrum.smallest() < 0.0)) {
    throw NotPsdError(what + " is not positive semi-definite (smallest eigenvalue " +
                      std::to_string(spectrum.smallest()) + ")");
  }
}

inline void check_psd(const Matrix& m, double tol, const std::string& what) {
  check_psd(decompose(m), tol, what);
}

/// Symmetric square root U sqrt(D) U^T; eigenvalues within tolerance of
/// zero from below are treated as zero.
inline Matrix sqrt_psd(const Matrix& m) {
  const SpectralDecomposition spectrum = decompose(m);
  check_psd(spectrum, kPsdTolerance, "sqrt_psd argument");
  const Vector roots = spectrum.eigenvalues.cwiseMax(0.0).cwiseSqrt();
  return symmetrize(spectrum.eigenvectors * roots.asDiagonal() * spectrum.eigenvectors.transpose());
}

/// Smallest eigenvalue exceeding rel_tol * lambda_max.
inline double lambda_plus(const Matrix& m, double rel_tol = kPsdTolerance) {
  const SpectralDecomposition spectrum = decompose(m);
  const double threshold = rel_tol * spectrum.largest();
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < spectrum.eigenvalues.size(); ++i) {
    const double value = spectrum.eigenvalues(i);
    if (value > threshold && value > 0.0) best = std::min(best, value);
  }
  if (!std::isfinite(best)) throw NotPsdError("lambda_plus: matrix has no strictly positive eigenvalue");
  return best;
}

struct PerturbationBound {
  double lhs = 0.0;  // ||sqrt(A) - sqrt(B)||_F
  double rhs = 0.0;  // ||A - B||_F / sqrt(lambda_min(A)), +inf if A is singular

  bool holds(double slack = 0.0) const { return lhs <= rhs + slack; }
};

/// Both sides of ||sqrt A - sqrt B||_F <= ||A - B||_F / sqrt(lambda_min(A)).
inline PerturbationBound sqrt_perturbation_bound(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sqrt_perturbation_bound: shape mismatch");
  PerturbationBound bound;
  bound.lhs = (sqrt_psd(a) - sqrt_psd(b)).norm();
  const SpectralDecomposition spectrum = decompose(a);
  const double smallest = spectrum.smallest();
  if (smallest <= kPsdTolerance * spectrum.largest() || smallest <= 0.0) {
    bound.rhs = std::numeric_limits<double>::infinity();
  } else {
    bound.rhs = (a - b).norm() / std::sqrt(smallest);
  }
  return bound;
}

/// Exact W2 between N(0, A) and N(0, B).
inline double bures_w2(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols() && a.rows() == a.cols(),
          "bures_w2: shape mismatch");
  const Matrix root_a = sqrt_psd(a);
  check_psd(b, kPsdTolerance, "bures_w2 argument");
  const Matrix cross = sqrt_psd(symmetrize(root_a * symmetrize(b) * root_a));
  const double squared = a.trace() + b.trace() - 2.0 * cross.trace();
  return std::sqrt(std::max(squared, 0.0));
}

/// Id_n (x) A as an (n k) x (n k) block-diagonal matrix.
inline Matrix kron_identity(Eigen::Index n, const Matrix& a) {
  Matrix out = Matrix::Zero(n * a.rows(), n * a.cols());
  for (Eigen::Index i = 0; i < n; ++i) out.block(i * a.rows(), i * a.cols(), a.rows(), a.cols()) = a;
  return out;
}

}  // namespace nngpw
