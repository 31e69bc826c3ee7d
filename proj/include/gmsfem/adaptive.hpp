#pragma once

/** @file adaptive.hpp
    @brief Residual error indicators, bulk marking, and randomized local
    enrichment of the offline space.
*/

#include "assembly.hpp"
#include "coarse.hpp"
#include "error.hpp"
#include "field.hpp"
#include "grid.hpp"
#include "parallel.hpp"
#include "pou.hpp"
#include "snapshot.hpp"
#include "spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace gmsfem {

struct NodeIndicator
{
  int node = 0;
  double residual_norm = 0.0; ///< ‖R_i‖ in the dual of H¹_0(ω_i) with the κ-energy norm
  double lambda = 0.0;        ///< first excluded eigenvalue at this node
  double eta2 = 0.0;          ///< residual_norm² / lambda
};

struct IndicatorReport
{
  std::vector<NodeIndicator> nodes; ///< interior coarse nodes, ascending
  [[nodiscard]] double sum_eta2() const
  {
    return std::accumulate(nodes.begin(), nodes.end(), 0.0, [](double s, const NodeIndicator& n) { return s + n.eta2; });
  }
};

/// Local residual norm: solve a(z, v) = (f, v) − a(u_H, v) for all v in
/// H¹_0(ω_i) and return (zᵀ A z)^{1/2}. `f_load` is the assembled load M f.
inline double local_residual_norm(const GridGeometry& geom, const CoefficientField& field, const NodeBox& omega,
                                  const Vector& u_coarse, const Vector& f_load)
{
  const auto op = assemble_stiffness(geom, field, omega);
  std::vector<int> perimeter;
  Vector u_local(static_cast<Eigen::Index>(omega.node_count()));
  Vector load(u_local.size());
  for (int k = 0; k < static_cast<int>(omega.node_count()); ++k) {
    const auto [i, j] = omega.ij(k);
    if (omega.on_perimeter(i, j)) perimeter.push_back(k);
    u_local[k] = u_coarse[geom.node_index(i, j)];
    load[k] = f_load[geom.node_index(i, j)];
  }
  // rows of interior nodes of ω_i see only elements of ω_i, so these entries match the global residual
  const Vector r = load - op.matrix * u_local;
  const DirichletSolver solver(op.matrix, perimeter);
  const Vector z = solver.solve(r, Vector::Zero(static_cast<Eigen::Index>(perimeter.size())));
  return energy_norm(op.matrix, z);
}

/// η_i² = ‖R_i‖² / λ_excluded for every interior coarse node.
inline IndicatorReport residual_indicators(const GridGeometry& geom, const CoefficientField& field,
                                           const Vector& u_coarse, const Vector& f_load,
                                           const std::vector<OfflineBasis>& bases, int threads = 1)
{
  std::vector<int> interior;
  for (int n = 0; n < geom.coarse_node_count(); ++n)
    if (geom.is_interior_coarse_node(n)) interior.push_back(n);
  IndicatorReport report;
  report.nodes.resize(interior.size());
  parallel_for(interior.size(), threads, [&](std::size_t k) {
    const int node = interior[k];
    const auto& b = bases.at(static_cast<std::size_t>(node));
    if (!b.excluded_eigenvalue || !(*b.excluded_eigenvalue > 0.0))
      throw NumericalError("node " + std::to_string(node) + " has no positive excluded eigenvalue");
    NodeIndicator& out = report.nodes[k];
    out.node = node;
    out.residual_norm = local_residual_norm(geom, field, geom.omega(node), u_coarse, f_load);
    out.lambda = *b.excluded_eigenvalue;
    out.eta2 = out.residual_norm * out.residual_norm / out.lambda;
  });
  return report;
}

/// Bulk marking: the smallest set of nodes, taken in decreasing η² (ties by
/// node index), whose η² sum reaches θ·Σ η². Nodes with η = 0 are never marked.
/// Result is sorted by node index.
inline std::vector<int> mark(const IndicatorReport& report, double theta, const std::set<int>& exclude = {})
{
  if (!(theta > 0.0 && theta <= 1.0)) throw ConfigError("theta must lie in (0, 1]");
  std::vector<const NodeIndicator*> order;
  for (const auto& n : report.nodes)
    if (n.eta2 > 0.0 && !exclude.count(n.node)) order.push_back(&n);
  std::stable_sort(order.begin(), order.end(), [](const NodeIndicator* a, const NodeIndicator* b) {
    return a->eta2 > b->eta2 || (a->eta2 == b->eta2 && a->node < b->node);
  });
  double total = 0.0;
  for (const auto* n : order) total += n->eta2;
  std::vector<int> marked;
  // relative slack so that θ = 1 or an exact partial sum is not lost to rounding
  const double goal = theta * total * (1.0 - 1e-12);
  double sum = 0.0;
  for (const auto* n : order) {
    if (sum >= goal && !marked.empty()) break;
    marked.push_back(n->node);
    sum += n->eta2;
  }
  std::sort(marked.begin(), marked.end());
  return marked;
}

/// A projected snapshot direction counts as new only if its M̃-norm exceeds
/// this fraction of the largest fresh snapshot norm.
inline constexpr double enrichment_saturation_tolerance = 1e-8;

/// A candidate mode is appended only if χ_i ψ keeps at least this fraction of
/// its energy norm after energy-orthogonal projection onto the χ_i ψ of the
/// modes already at the node. Modes living on ∂ω_i, where χ_i vanishes, fail.
inline constexpr double enrichment_independence_tolerance = 1e-3;

struct Enrichment
{
  OfflineBasis basis;
  int local_solves = 0;
  int appended = 0;
};

/// Append up to `c_nb` modes to `existing` from `c_nb + c_bf` fresh random
/// snapshots.
///
/// Each new snapshot has its M̃-projection onto every existing mode removed
/// (the existing modes are M̃-orthonormal and include the constant direction),
/// then the local spectral problem is solved on the residuals. Candidates are
/// taken in ascending eigenvalue order and skipped when χ_i ψ is dependent on
/// the modes already kept. The excluded eigenvalue becomes the first candidate
/// eigenvalue not taken, or stays unchanged when none remains. Throws
/// NumericalError when nothing can be appended.
inline Enrichment enrich(const GridGeometry& geom, const CoefficientField& field, const CoefficientField& weight,
                         const Neighborhood& nb, const Vector& chi, const OfflineBasis& existing, int c_nb, int c_bf,
                         std::uint64_t seed, std::uint64_t stream)
{
  if (c_nb < 1) throw ConfigError("c_nb must be >= 1");
  if (c_bf < 0) throw ConfigError("c_bf must be >= 0");
  if (!(existing.omega == nb.omega) || chi.size() != existing.modes.cols())
    throw ConfigError("existing basis does not live on this neighborhood");
  const std::string saturated = "enrichment of node " + std::to_string(nb.node) + " saturated";

  const SnapshotSet fresh = random_snapshots(geom, field, nb, c_nb, c_bf, seed, stream);
  const LocalOperators ops = local_operators(geom, field, weight, nb.omega);
  Matrix phi = fresh.rows.bottomRows(fresh.count() - 1);

  double scale = 0.0;
  for (Eigen::Index r = 0; r < phi.rows(); ++r) scale = std::max(scale, energy_norm(ops.mass, phi.row(r).transpose()));

  const Matrix& psi = existing.modes;
  const Matrix m_psi = (ops.mass * psi.transpose()).transpose(); // rows: M̃ ψ_j
  const Vector norms = (m_psi.cwiseProduct(psi)).rowwise().sum();
  // two passes of classical Gram–Schmidt against the fixed existing set
  for (int pass = 0; pass < 2; ++pass) {
    const Matrix proj = phi * m_psi.transpose(); // ⟨φ_i, ψ_j⟩
    for (Eigen::Index j = 0; j < psi.rows(); ++j) phi -= (proj.col(j) / norms[j]) * psi.row(j);
  }
  if (!(phi.norm() > 0.0)) throw NumericalError(saturated);
  const SnapshotSpectrum sp = snapshot_spectrum(phi, ops.stiffness, ops.mass, enrichment_saturation_tolerance, scale);

  // energy-orthonormal basis of the kept χψ, extended one candidate at a time
  std::vector<Vector> onb;
  auto try_add = [&](const Vector& mode) {
    Vector w = mode.cwiseProduct(chi);
    const double n0 = energy_norm(ops.stiffness, w);
    if (!(n0 > 0.0)) return false;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : onb) w -= q.dot(ops.stiffness * w) * q;
    const double n1 = energy_norm(ops.stiffness, w);
    if (!(n1 > enrichment_independence_tolerance * n0)) return false;
    onb.push_back(w / n1);
    return true;
  };
  for (Eigen::Index r = 0; r < psi.rows(); ++r) try_add(psi.row(r).transpose());

  std::vector<Eigen::Index> taken;
  Eigen::Index next = 0;
  for (; next < sp.values.size() && static_cast<int>(taken.size()) < c_nb; ++next)
    if (try_add(sp.modes.row(next).transpose())) taken.push_back(next);
  if (taken.empty()) throw NumericalError(saturated);

  const auto added = static_cast<Eigen::Index>(taken.size());
  Enrichment out;
  out.basis = existing;
  out.basis.modes.conservativeResize(psi.rows() + added, Eigen::NoChange);
  out.basis.eigenvalues.conservativeResize(existing.eigenvalues.size() + added);
  for (Eigen::Index k = 0; k < added; ++k) {
    out.basis.modes.row(psi.rows() + k) = sp.modes.row(taken[static_cast<std::size_t>(k)]);
    out.basis.eigenvalues[existing.eigenvalues.size() + k] = sp.values[taken[static_cast<std::size_t>(k)]];
  }
  // Θ refers to the initial snapshot rows only
  out.basis.coefficients.resize(0, 0);
  if (next < sp.values.size()) out.basis.excluded_eigenvalue = sp.values[next];
  out.local_solves = fresh.local_solves;
  out.appended = static_cast<int>(added);
  return out;
}

struct AdaptiveConfig
{
  double theta = 0.3;
  int c_nb = 2;
  int c_bf = 1;
  int max_iter = 60;
  double target_err = 0.0; ///< stop once the H¹_κ error (%) is at or below this; 0 disables
  std::size_t max_dim = 0; ///< stop once the coarse dimension reaches this; 0 disables
};

struct AdaptiveRow
{
  int iter = 0;
  std::size_t dim = 0;
  std::size_t marked_count = 0; ///< nodes enriched after this row
  double l2_err = 0.0;
  double h1_err = 0.0;
  double sum_eta2 = 0.0;
};

/// Inputs shared by every iteration of the loop.
struct AdaptiveProblem
{
  const GridGeometry& geom;
  const CoefficientField& field;
  const CoefficientField& weight;
  const PartitionOfUnity& pou;
  const GlobalOperators& ops;
  const Vector& u_fine;
  const Vector& f_nodal;
  ScalarFunction g;
};

/// solve → indicate → mark → enrich until `max_iter` enrichment rounds, the
/// target error or dimension, or no enrichable node remains. Enrichment of round `m` uses
/// random stream `m + 1`; the initial snapshots use stream 0.
inline std::vector<AdaptiveRow> adaptive_loop(const AdaptiveProblem& p, const ReductionConfig& initial,
                                              const AdaptiveConfig& cfg,
                                              std::vector<OfflineBasis>* final_bases = nullptr)
{
  if (initial.mode != SnapshotMode::random) throw ConfigError("adaptive enrichment starts from random snapshots");
  if (cfg.max_iter < 0) throw ConfigError("max_iter must be >= 0");
  std::vector<OfflineBasis> bases = reduce_all(p.geom, p.field, p.weight, initial);
  const Vector f_load = p.ops.unit_mass * p.f_nodal;
  std::set<int> saturated;
  std::vector<AdaptiveRow> rows;

  for (int iter = 0;; ++iter) {
    const CoarseSpace space = build_coarse_space(p.geom, p.pou, bases);
    const CoarseSolution sol = solve_coarse(space, p.geom, p.ops, p.f_nodal, p.g);
    const ErrorReport err = error_report(p.u_fine, sol.fine, p.ops, space.dim(), 0.0);
    const IndicatorReport ind = residual_indicators(p.geom, p.field, sol.fine, f_load, bases, initial.threads);

    AdaptiveRow row{iter, space.dim(), 0, err.l2_percent, err.h1_percent, ind.sum_eta2()};
    const bool done = iter >= cfg.max_iter || (cfg.target_err > 0.0 && err.h1_percent <= cfg.target_err) ||
                      (cfg.max_dim > 0 && space.dim() >= cfg.max_dim);
    std::vector<int> marked;
    if (!done) marked = mark(ind, cfg.theta, saturated);
    row.marked_count = marked.size();
    rows.push_back(row);
    if (marked.empty()) break;

    std::vector<std::optional<Enrichment>> grown(marked.size());
    parallel_for(marked.size(), initial.threads, [&](std::size_t k) {
      const int node = marked[k];
      const Neighborhood nb = neighborhood(p.geom, node, initial.oversampling, initial.skin);
      try {
        grown[k] = enrich(p.geom, p.field, p.weight, nb, p.pou.chi[static_cast<std::size_t>(node)],
                          bases[static_cast<std::size_t>(node)], cfg.c_nb, cfg.c_bf, initial.seed,
                          static_cast<std::uint64_t>(iter) + 1);
      } catch (const NumericalError&) {
        grown[k].reset();
      }
    });
    bool any = false;
    for (std::size_t k = 0; k < marked.size(); ++k) {
      if (grown[k]) {
        bases[static_cast<std::size_t>(marked[k])] = std::move(grown[k]->basis);
        any = true;
      } else {
        saturated.insert(marked[k]);
      }
    }
    if (!any) {
      rows.back().marked_count = 0;
      break;
    }
  }
  if (final_bases) *final_bases = std::move(bases);
  return rows;
}

} // namespace gmsfem
