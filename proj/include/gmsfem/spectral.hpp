#pragma once

/** @file spectral.hpp
    @brief Local spectral reduction of a snapshot space to the offline basis.

    With snapshot rows Ψ on ω_i, stiffness A and κ̃-mass M̃ on ω_i, solve
    (Ψ A Ψᵀ) θ = λ (Ψ M̃ Ψᵀ) θ and keep the smallest eigenvalues. Kept modes
    ψ_k = θ_kᵀ Ψ are M̃-orthonormal.
*/

#include "assembly.hpp"
#include "eigen.hpp"
#include "field.hpp"
#include "grid.hpp"
#include "parallel.hpp"
#include "snapshot.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace gmsfem {

struct OfflineBasis
{
  int node = 0;
  NodeBox omega;
  Vector eigenvalues;  ///< kept, ascending
  Matrix modes;        ///< one mode per row over the nodes of ω_i
  Matrix coefficients; ///< Θ: row k expresses mode k in the snapshot rows
  std::optional<double> excluded_eigenvalue;

  [[nodiscard]] Eigen::Index size() const { return modes.rows(); }
};

/// Stiffness and κ̃-mass restricted to the elements of ω_i.
struct LocalOperators
{
  NodeBox omega;
  SparseMatrix stiffness;
  SparseMatrix mass;
};

inline LocalOperators local_operators(const GridGeometry& geom, const CoefficientField& field,
                                      const CoefficientField& weight, const NodeBox& omega)
{
  return {omega, assemble_stiffness(geom, field, omega).matrix, assemble_mass(geom, weight, omega).matrix};
}

/// The single constant mode (boundary coarse nodes, or `k_nb = 0`).
inline OfflineBasis constant_basis(int node, const NodeBox& omega)
{
  OfflineBasis b;
  b.node = node;
  b.omega = omega;
  b.eigenvalues = Vector::Zero(1);
  b.modes = Matrix::Ones(1, static_cast<Eigen::Index>(omega.node_count()));
  b.coefficients = Matrix::Ones(1, 1);
  return b;
}

/// Relative singular-value threshold below which snapshot directions (in the
/// M-norm) are treated as linearly dependent; the constant row is the sum of
/// all δ-snapshots, for instance.
inline constexpr double snapshot_rank_tolerance = 1e-12;

/// Generalized eigenpairs of (Ψ A Ψᵀ, Ψ M Ψᵀ) computed without forming the
/// Gram matrices. The rows of Ψ are first replaced by an M-orthonormal basis
/// Q of their span (SVD of Ψ L with M = L Lᵀ); directions with singular value
/// at or below `rank_tol * σ_max` are dropped. Then Q A Qᵀ y = λ y is solved.
struct SnapshotSpectrum
{
  Vector values;       ///< ascending
  Matrix modes;        ///< one M-orthonormal mode per row
  Matrix coefficients; ///< row k expresses mode k in the rows of Ψ
};

/// `reference_sigma`, when larger than σ_max, replaces it as the scale of the
/// rank cut (rows that were reduced by projection keep the original scale).
inline SnapshotSpectrum snapshot_spectrum(const Matrix& psi, const SparseMatrix& a, const SparseMatrix& m,
                                          double rank_tol, double reference_sigma = 0.0)
{
  const Eigen::LLT<Matrix> llt{Matrix(m)};
  if (llt.info() != Eigen::Success) throw NumericalError("local mass matrix is not positive definite");
  const Matrix l = llt.matrixL();
  const Matrix r = psi * l;
  Eigen::BDCSVD<Matrix> svd(r, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sigma = svd.singularValues();
  if (sigma.size() == 0 || !(sigma[0] > 0.0)) throw NumericalError("snapshot rows are all zero");
  const double cut = rank_tol * std::max(sigma[0], reference_sigma);
  Eigen::Index rank = 0;
  while (rank < sigma.size() && sigma[rank] > cut) ++rank;
  if (rank == 0) throw NumericalError("snapshot rows are numerically zero");

  // q_k = v_kᵀ L⁻¹ has unit M-norm and lies in the row span of Ψ
  const Matrix q = llt.matrixU().solve(svd.matrixV().leftCols(rank)).transpose();
  Matrix c = q * (a * q.transpose());
  c = 0.5 * (c + c.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> es(c);
  if (es.info() != Eigen::Success) throw NumericalError("reduced symmetric eigensolve failed");

  SnapshotSpectrum out;
  out.values = es.eigenvalues();
  out.modes = es.eigenvectors().transpose() * q;
  // q = Σ⁻¹ Uᵀ Ψ on the kept directions
  Matrix to_psi = svd.matrixU().leftCols(rank).transpose();
  for (Eigen::Index k = 0; k < rank; ++k) to_psi.row(k) /= sigma[k];
  out.coefficients = es.eigenvectors().transpose() * to_psi;
  return out;
}

inline OfflineBasis offline_reduce(const SnapshotSet& snaps, const LocalOperators& ops, int m_off)
{
  if (m_off < 1) throw ConfigError("m_off must be >= 1");
  if (m_off > snaps.count())
    throw ConfigError("m_off = " + std::to_string(m_off) + " exceeds snapshot count " + std::to_string(snaps.count()));
  if (snaps.rows.cols() != ops.stiffness.rows()) throw ConfigError("snapshot rows do not match the local operators");

  const SnapshotSpectrum sp = snapshot_spectrum(snaps.rows, ops.stiffness, ops.mass, snapshot_rank_tolerance);
  if (sp.values.size() < m_off)
    throw NumericalError("snapshot space of node " + std::to_string(snaps.node) + " has numerical rank " +
                         std::to_string(sp.values.size()) + " < m_off = " + std::to_string(m_off));

  OfflineBasis b;
  b.node = snaps.node;
  b.omega = snaps.omega;
  b.eigenvalues = sp.values.head(m_off);
  b.coefficients = sp.coefficients.topRows(m_off);
  b.modes = sp.modes.topRows(m_off);
  if (sp.values.size() > m_off) b.excluded_eigenvalue = sp.values[m_off];
  return b;
}

inline OfflineBasis offline_reduce(const SnapshotSet& snaps, const GridGeometry& geom, const CoefficientField& field,
                                   const CoefficientField& weight, int m_off)
{
  return offline_reduce(snaps, local_operators(geom, field, weight, snaps.omega), m_off);
}

struct ReductionConfig
{
  SnapshotMode mode = SnapshotMode::random;
  int oversampling = 3;
  int k_nb = 5;  ///< spectral modes per interior node, beyond the constant
  int p_bf = 4;  ///< random buffer (random mode); extra strip modes (skin mode)
  std::uint64_t seed = 0;
  SkinWidth skin;
  int threads = 1;
};

/// Computed snapshots per interior node in skin mode.
inline int skin_snapshot_count(int k_nb, int p_bf) { return k_nb + std::max(p_bf, 1); }

/// Snapshots computed per interior node for `cfg`.
inline int snapshots_per_node(const ReductionConfig& cfg, const GridGeometry& geom)
{
  switch (cfg.mode) {
  case SnapshotMode::random: return cfg.k_nb + cfg.p_bf;
  case SnapshotMode::skin: return skin_snapshot_count(cfg.k_nb, cfg.p_bf);
  case SnapshotMode::full: break;
  }
  const int ex = 2 * geom.fine_per_coarse() + 2 * cfg.oversampling;
  return 2 * (ex + ex);
}

/// Snapshot ratio (%): computed snapshots per interior node over the number of
/// fine boundary nodes of an unclipped interior ω_i^+.
inline double snapshot_ratio(const GridGeometry& geom, int oversampling, int computed)
{
  const int ex = 2 * geom.fine_per_coarse() + 2 * oversampling;
  return 100.0 * computed / (2.0 * (ex + ex));
}

/// Offline dimension: one constant per coarse node plus `k_nb` per interior node.
inline std::size_t offline_dimension(const GridGeometry& geom, int k_nb)
{
  return static_cast<std::size_t>(geom.coarse_node_count()) +
         static_cast<std::size_t>(geom.interior_coarse_node_count()) * static_cast<std::size_t>(k_nb);
}

inline SnapshotSet compute_snapshots(const GridGeometry& geom, const CoefficientField& field,
                                     const CoefficientField& weight, const Neighborhood& nb, const ReductionConfig& cfg)
{
  switch (cfg.mode) {
  case SnapshotMode::full: return full_snapshots(geom, field, nb);
  case SnapshotMode::random: return random_snapshots(geom, field, nb, cfg.k_nb, cfg.p_bf, cfg.seed);
  case SnapshotMode::skin: return skin_snapshots(geom, field, weight, nb, skin_snapshot_count(cfg.k_nb, cfg.p_bf));
  }
  throw ConfigError("unknown snapshot mode");
}

/// Offline basis for every coarse node, indexed by node. Interior nodes keep
/// the constant plus `k_nb` spectral modes; boundary nodes keep the constant.
inline std::vector<OfflineBasis> reduce_all(const GridGeometry& geom, const CoefficientField& field,
                                            const CoefficientField& weight, const ReductionConfig& cfg)
{
  if (cfg.k_nb < 0) throw ConfigError("k_nb must be >= 0");
  std::vector<OfflineBasis> bases(static_cast<std::size_t>(geom.coarse_node_count()));
  parallel_for(bases.size(), cfg.threads, [&](std::size_t k) {
    const int node = static_cast<int>(k);
    if (!geom.is_interior_coarse_node(node) || cfg.k_nb == 0) {
      bases[k] = constant_basis(node, geom.omega(node));
      return;
    }
    const Neighborhood nb = neighborhood(geom, node, cfg.oversampling, cfg.skin);
    bases[k] = offline_reduce(compute_snapshots(geom, field, weight, nb, cfg), geom, field, weight, cfg.k_nb + 1);
  });
  return bases;
}

/// CSV `node,k,lambda` for every kept mode.
inline void write_spectrum(std::ostream& out, const std::vector<OfflineBasis>& bases)
{
  out << "node,k,lambda\n";
  char buf[64];
  for (const auto& b : bases)
    for (Eigen::Index k = 0; k < b.eigenvalues.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.6g", b.eigenvalues[k]);
      out << b.node << ',' << k + 1 << ',' << buf << '\n';
    }
}

} // namespace gmsfem
