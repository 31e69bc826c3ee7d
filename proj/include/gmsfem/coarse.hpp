#pragma once

/** @file coarse.hpp
    @brief Multiscale basis φ = χ_i ψ_k, the global Galerkin coarse solve, and
    relative error norms.
*/

#include "assembly.hpp"
#include "error.hpp"
#include "field.hpp"
#include "grid.hpp"
#include "pou.hpp"
#include "spectral.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace gmsfem {

struct BasisFunction
{
  int node = 0;
  int mode = 0;
  NodeBox support; ///< ω_i
  Vector values;   ///< on the nodes of `support`
};

struct CoarseSpace
{
  std::vector<BasisFunction> functions;
  std::vector<int> node_offset;    ///< first dof of each coarse node; size node_count + 1
  std::vector<int> constrained;    ///< dofs fixed by Dirichlet data (ascending)
  std::vector<int> constrained_node;

  [[nodiscard]] std::size_t dim() const { return functions.size(); }
  [[nodiscard]] int modes_at(int node) const
  {
    return node_offset[static_cast<std::size_t>(node) + 1] - node_offset[static_cast<std::size_t>(node)];
  }
};

/// φ_k^{ω_i} = χ_i ψ_k on ω_i. The constant mode of every boundary coarse node
/// is constrained; boundary nodes must carry exactly that one mode.
inline CoarseSpace build_coarse_space(const GridGeometry& geom, const PartitionOfUnity& pou,
                                      const std::vector<OfflineBasis>& bases)
{
  const auto nodes = static_cast<std::size_t>(geom.coarse_node_count());
  if (bases.size() != nodes || pou.chi.size() != nodes)
    throw ConfigError("need one offline basis and one partition function per coarse node");

  CoarseSpace space;
  space.node_offset.push_back(0);
  for (std::size_t n = 0; n < nodes; ++n) {
    const auto& b = bases[n];
    const auto& chi = pou.chi[n];
    if (b.node != static_cast<int>(n)) throw ConfigError("offline basis list is not ordered by node");
    if (b.size() < 1) throw ConfigError("missing offline basis for node " + std::to_string(n));
    if (!(b.omega == pou.support[n]) || b.modes.cols() != chi.size())
      throw ConfigError("offline basis support of node " + std::to_string(n) + " differs from ω_i");
    const bool boundary = !geom.is_interior_coarse_node(static_cast<int>(n));
    if (boundary) {
      if (b.size() != 1 || (b.modes.row(0).array() - 1.0).abs().maxCoeff() > 1e-12)
        throw ConfigError("boundary coarse node " + std::to_string(n) + " must carry only the constant mode");
      space.constrained.push_back(static_cast<int>(space.functions.size()));
      space.constrained_node.push_back(static_cast<int>(n));
    }
    for (Eigen::Index k = 0; k < b.size(); ++k)
      space.functions.push_back({static_cast<int>(n), static_cast<int>(k), b.omega,
                                 b.modes.row(k).transpose().cwiseProduct(chi)});
    space.node_offset.push_back(static_cast<int>(space.functions.size()));
  }
  return space;
}

/// Φ: one row per coarse dof, one column per global fine node.
inline SparseMatrix basis_matrix(const GridGeometry& geom, const CoarseSpace& space)
{
  std::vector<Eigen::Triplet<double>> t;
  for (std::size_t d = 0; d < space.functions.size(); ++d) {
    const auto& f = space.functions[d];
    for (int j = f.support.j0; j <= f.support.j1; ++j)
      for (int i = f.support.i0; i <= f.support.i1; ++i) {
        const double v = f.values[f.support.local(i, j)];
        if (v != 0.0) t.emplace_back(static_cast<int>(d), geom.node_index(i, j), v);
      }
  }
  SparseMatrix phi(static_cast<Eigen::Index>(space.dim()), static_cast<Eigen::Index>(geom.node_count()));
  phi.setFromTriplets(t.begin(), t.end());
  return phi;
}

/// Pivots of the scaled coarse matrix at or below this fraction of the largest
/// one mark dofs that are dependent on the others; they are set to zero.
inline constexpr double coarse_pivot_tolerance = 1e-12;

/// Solve a symmetric positive semi-definite system after symmetric diagonal
/// scaling, by diagonally pivoted LDLᵀ. Dependent dofs get zero coefficients,
/// which leaves the Galerkin solution unchanged when the basis is redundant.
inline Vector solve_spd_scaled(const Matrix& a, const Vector& b)
{
  const Eigen::Index n = a.rows();
  Vector d(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    if (!(a(k, k) > 0.0)) throw NumericalError("coarse matrix has a non-positive diagonal entry (zero basis function?)");
    d[k] = 1.0 / std::sqrt(a(k, k));
  }
  const Matrix s = d.asDiagonal() * a * d.asDiagonal();
  const Vector sb = d.cwiseProduct(b);
  // info() flags exact zero pivots, which a dependent basis produces; the
  // factorization itself stays valid, so the pivots are checked directly.
  const Eigen::LDLT<Matrix> ldlt(s);
  const Vector piv = ldlt.vectorD();
  if (!piv.allFinite()) throw NumericalError("coarse matrix factorization failed");
  const double cut = coarse_pivot_tolerance * piv.cwiseAbs().maxCoeff();
  if (piv.minCoeff() < -cut) throw NumericalError("coarse matrix is indefinite");
  auto apply = [&](const Vector& rhs) {
    Vector y = ldlt.transpositionsP() * rhs;
    ldlt.matrixL().solveInPlace(y);
    for (Eigen::Index k = 0; k < n; ++k) y[k] = piv[k] > cut ? y[k] / piv[k] : 0.0;
    ldlt.matrixU().solveInPlace(y);
    return Vector(ldlt.transpositionsP().transpose() * y);
  };
  Vector y = apply(sb);
  y += apply(sb - s * y);
  return d.cwiseProduct(y);
}

struct CoarseSolution
{
  Vector coefficients; ///< c_k^i in dof order
  Vector fine;         ///< u_H = Φᵀ c on the full fine grid
};

/// Galerkin solve a(u_H, v) = (f, v) over the free dofs, with each boundary
/// node's constant coefficient fixed to g(x_i).
inline CoarseSolution solve_coarse(const CoarseSpace& space, const GridGeometry& geom, const GlobalOperators& ops,
                                   const Vector& f_nodal, const ScalarFunction& g)
{
  const SparseMatrix phi = basis_matrix(geom, space);
  const SparseMatrix phi_a = phi * ops.stiffness;
  const Matrix a_c = Matrix(phi_a * SparseMatrix(phi.transpose()));
  const Vector b_c = phi * (ops.unit_mass * f_nodal);

  const auto n = static_cast<Eigen::Index>(space.dim());
  std::vector<int> slot(static_cast<std::size_t>(n), -1);
  for (int c : space.constrained) slot[static_cast<std::size_t>(c)] = -2;
  std::vector<int> free;
  for (Eigen::Index d = 0; d < n; ++d)
    if (slot[static_cast<std::size_t>(d)] == -1) {
      slot[static_cast<std::size_t>(d)] = static_cast<int>(free.size());
      free.push_back(static_cast<int>(d));
    }

  Vector c = Vector::Zero(n);
  for (std::size_t k = 0; k < space.constrained.size(); ++k) {
    const auto [fi, fj] = geom.coarse_node_fine_ij(space.constrained_node[k]);
    c[space.constrained[k]] = g(geom.x(fi), geom.y(fj));
  }

  if (!free.empty()) {
    const auto nf = static_cast<Eigen::Index>(free.size());
    Matrix a_ff(nf, nf);
    Vector rhs(nf);
    for (Eigen::Index r = 0; r < nf; ++r) {
      const int dr = free[static_cast<std::size_t>(r)];
      double s = b_c[dr];
      for (int cd : space.constrained) s -= a_c(dr, cd) * c[cd];
      rhs[r] = s;
      for (Eigen::Index q = 0; q < nf; ++q) a_ff(r, q) = a_c(dr, free[static_cast<std::size_t>(q)]);
    }
    const Vector x = solve_spd_scaled(a_ff, rhs);
    for (Eigen::Index r = 0; r < nf; ++r) c[free[static_cast<std::size_t>(r)]] = x[r];
  }
  return {c, phi.transpose() * c};
}

inline CoarseSolution solve_coarse(const CoarseSpace& space, const GridGeometry& geom, const CoefficientField& field,
                                   const ScalarFunction& f, const ScalarFunction& g)
{
  return solve_coarse(space, geom, assemble_global(geom, field), interpolate(geom, f), g);
}

struct ErrorReport
{
  double l2_percent = 0.0; ///< 100 ‖u − u_H‖_{L²_κ} / ‖u‖_{L²_κ}
  double h1_percent = 0.0; ///< 100 ‖u − u_H‖_{H¹_κ} / ‖u‖_{H¹_κ}
  std::size_t dim = 0;
  double snapshot_ratio = 0.0;
};

inline ErrorReport error_report(const Vector& u_fine, const Vector& u_coarse, const GlobalOperators& ops,
                                std::size_t dim, double ratio)
{
  const double l2_ref = energy_norm(ops.kappa_mass, u_fine);
  const double h1_ref = energy_norm(ops.stiffness, u_fine);
  if (!(l2_ref > 0.0) || !(h1_ref > 0.0)) throw NumericalError("reference solution has zero norm");
  const Vector e = u_fine - u_coarse;
  return {100.0 * energy_norm(ops.kappa_mass, e) / l2_ref, 100.0 * energy_norm(ops.stiffness, e) / h1_ref, dim, ratio};
}

inline ErrorReport error_report(const Vector& u_fine, const Vector& u_coarse, const GridGeometry& geom,
                                const CoefficientField& field, const CoarseSpace& space, double ratio = 0.0)
{
  return error_report(u_fine, u_coarse, assemble_global(geom, field), space.dim(), ratio);
}

} // namespace gmsfem
