#pragma once

/** @file eigen.hpp
    @brief Dense symmetric generalized eigenproblems A x = λ S x.
*/

#include "assembly.hpp"
#include "error.hpp"

#include <Eigen/Eigenvalues>

#include <string>

namespace gmsfem {

/// Eigenvalues ascending; eigenvectors are the columns of `vectors` and are
/// S-orthonormal.
struct Eigenpairs
{
  Vector values;
  Matrix vectors;
};

/// Solve A x = λ S x for symmetric A and symmetric positive semi-definite S.
///
/// S is diagonalized first and directions with S-eigenvalue at or below
/// `rank_tol * max` are discarded; the remaining space is whitened and the
/// reduced standard problem is solved. The result therefore has
/// `rank(S)` pairs, which may be fewer than `A.rows()`.
inline Eigenpairs generalized_eigen(const Matrix& a, const Matrix& s, double rank_tol = 1e-12)
{
  if (a.rows() != a.cols() || s.rows() != s.cols() || a.rows() != s.rows())
    throw ConfigError("generalized_eigen: matrix shapes differ");
  if (a.rows() == 0) return {Vector(0), Matrix(0, 0)};

  const Matrix s_sym = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(s_sym);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition of mass Gram matrix failed");
  const Vector& d = es.eigenvalues();
  const double dmax = d.maxCoeff();
  if (!(dmax > 0.0)) throw NumericalError("mass Gram matrix has no positive direction");

  Eigen::Index first = 0;
  while (first < d.size() && d[first] <= rank_tol * dmax) ++first;
  const Eigen::Index rank = d.size() - first;

  Matrix w = es.eigenvectors().rightCols(rank);
  for (Eigen::Index k = 0; k < rank; ++k) w.col(k) /= std::sqrt(d[first + k]);

  Matrix c = w.transpose() * a * w;
  c = 0.5 * (c + c.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> ec(c);
  if (ec.info() != Eigen::Success) throw NumericalError("reduced symmetric eigensolve failed");
  return {ec.eigenvalues(), w * ec.eigenvectors()};
}

/// A x = λ B x with B symmetric positive definite (Cholesky route, all pairs).
inline Eigenpairs generalized_eigen_spd(const Matrix& a, const Matrix& b)
{
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(a, b, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
  if (es.info() != Eigen::Success) throw NumericalError("generalized eigensolve failed (B not positive definite?)");
  return {es.eigenvalues(), es.eigenvectors()};
}

} // namespace gmsfem
