#pragma once

/** @file experiments.hpp
    @brief Table-style experiments driven by a RunConfig. Each returns the CSV
    text it would print, so results can be compared byte for byte.
*/

#include "adaptive.hpp"
#include "analysis.hpp"
#include "assembly.hpp"
#include "coarse.hpp"
#include "config.hpp"
#include "field.hpp"
#include "grid.hpp"
#include "parallel.hpp"
#include "pou.hpp"
#include "snapshot.hpp"
#include "spectral.hpp"

#include <algorithm>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace gmsfem {

/// Everything shared by the coarse solves of one configuration.
struct Problem
{
  GridGeometry geom;
  CoefficientField field;
  PartitionOfUnity pou;
  CoefficientField weight; ///< κ̃
  GlobalOperators ops;
  ScalarFunction f;
  ScalarFunction g;
  Vector f_nodal;
  Vector u_fine;
};

inline CoefficientField make_field(const GridGeometry& geom, const RunConfig& cfg)
{
  if (!cfg.field_path.empty()) return load_field(cfg.field_path, geom);
  ChannelParams params;
  params.margin = cfg.channel_margin;
  return generate_channels(geom, cfg.contrast, cfg.field_seed, params);
}

inline Problem make_problem(const RunConfig& cfg, int threads = 1)
{
  cfg.validate();
  GridGeometry geom = build_geometry(cfg.coarse_nx, cfg.coarse_ny, cfg.fine_per_coarse);
  CoefficientField field = make_field(geom, cfg);
  PartitionOfUnity pou = build_pou(geom, field, cfg.pou_mode, threads);
  CoefficientField weight = mass_weight(geom, field, pou, cfg.kappa_tilde_mode);
  GlobalOperators ops = assemble_global(geom, field);
  const double fv = cfg.f_value, a = cfg.g_const, bx = cfg.g_x, by = cfg.g_y;
  ScalarFunction f = [fv](double, double) { return fv; };
  ScalarFunction g = [a, bx, by](double x, double y) { return a + bx * x + by * y; };
  Vector f_nodal = interpolate(geom, f);
  Vector u_fine = fine_reference_solve(geom, field, f, g);
  return {std::move(geom), std::move(field), std::move(pou), std::move(weight), std::move(ops),
          std::move(f),    std::move(g),     std::move(f_nodal), std::move(u_fine)};
}

inline ReductionConfig reduction_config(const RunConfig& cfg, int threads)
{
  ReductionConfig r;
  r.mode = cfg.snapshot_mode;
  r.oversampling = cfg.oversample_t;
  r.k_nb = cfg.k_nb;
  r.p_bf = cfg.p_bf;
  r.seed = cfg.seed;
  r.threads = threads;
  return r;
}

struct PipelineResult
{
  ErrorReport report;
  Vector solution;
};

inline PipelineResult coarse_pipeline(const Problem& p, const std::vector<OfflineBasis>& bases, double ratio)
{
  const CoarseSpace space = build_coarse_space(p.geom, p.pou, bases);
  CoarseSolution sol = solve_coarse(space, p.geom, p.ops, p.f_nodal, p.g);
  return {error_report(p.u_fine, sol.fine, p.ops, space.dim(), ratio), std::move(sol.fine)};
}

/// Snapshot sets computed once at the largest request and sliced per row.
/// Random rows and skin rows of a smaller request are a prefix of a larger
/// one; full snapshots do not depend on k_nb, so their spectrum is shared.
class SnapshotCache
{
public:
  SnapshotCache(const Problem& p, const ReductionConfig& base, int max_computed)
    : p_(p), cfg_(base), sets_(static_cast<std::size_t>(p.geom.coarse_node_count())),
      full_(sets_.size())
  {
    parallel_for(sets_.size(), base.threads, [&](std::size_t k) {
      const int node = static_cast<int>(k);
      if (!p_.geom.is_interior_coarse_node(node)) return;
      const Neighborhood nb = neighborhood(p_.geom, node, cfg_.oversampling, cfg_.skin);
      switch (cfg_.mode) {
      case SnapshotMode::random:
        sets_[k] = random_snapshots(p_.geom, p_.field, nb, max_computed, 0, cfg_.seed);
        break;
      case SnapshotMode::skin:
        sets_[k] = skin_snapshots(p_.geom, p_.field, p_.weight, nb, max_computed);
        break;
      case SnapshotMode::full: {
        sets_[k] = full_snapshots(p_.geom, p_.field, nb);
        const LocalOperators ops = local_operators(p_.geom, p_.field, p_.weight, nb.omega);
        full_[k] = snapshot_spectrum(sets_[k].rows, ops.stiffness, ops.mass, snapshot_rank_tolerance);
        break;
      }
      }
    });
  }

  /// Offline bases with `k_nb` modes beyond the constant from the first
  /// `computed` snapshots (ignored in full mode).
  [[nodiscard]] std::vector<OfflineBasis> bases(int k_nb, int computed) const
  {
    std::vector<OfflineBasis> out(sets_.size());
    parallel_for(out.size(), cfg_.threads, [&](std::size_t k) {
      const int node = static_cast<int>(k);
      if (!p_.geom.is_interior_coarse_node(node) || k_nb == 0) {
        out[k] = constant_basis(node, p_.geom.omega(node));
        return;
      }
      const int m_off = k_nb + 1;
      if (cfg_.mode == SnapshotMode::full) {
        const SnapshotSpectrum& sp = full_[k];
        if (sp.values.size() < m_off)
          throw NumericalError("full snapshot space of node " + std::to_string(node) + " has numerical rank " +
                               std::to_string(sp.values.size()) + " < " + std::to_string(m_off));
        OfflineBasis b;
        b.node = node;
        b.omega = sets_[k].omega;
        b.eigenvalues = sp.values.head(m_off);
        b.modes = sp.modes.topRows(m_off);
        b.coefficients = sp.coefficients.topRows(m_off);
        if (sp.values.size() > m_off) b.excluded_eigenvalue = sp.values[m_off];
        out[k] = std::move(b);
        return;
      }
      out[k] = offline_reduce(sets_[k].head(computed), p_.geom, p_.field, p_.weight, m_off);
    });
    return out;
  }

private:
  const Problem& p_;
  ReductionConfig cfg_;
  std::vector<SnapshotSet> sets_;
  std::vector<SnapshotSpectrum> full_;
};

namespace detail {

inline std::string fmt(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

} // namespace detail

inline const std::vector<int> table_k_values{5, 10, 15, 20, 25};

struct ExperimentOutput
{
  std::string csv;
  std::optional<Vector> solution; ///< fine-grid field for --dump-solution, when the experiment has one
};

/// Fine reference solution: one row with its norms.
inline ExperimentOutput run_solve_fine(const RunConfig& cfg, int threads = 1)
{
  const Problem p = make_problem(cfg, threads);
  std::string csv = "nodes,elements,high_value_fraction,l2_norm,h1_norm\n";
  csv += std::to_string(p.geom.node_count()) + ',' + std::to_string(p.geom.element_count()) + ',' +
         detail::fmt(high_value_fraction(p.field)) + ',' + detail::fmt(energy_norm(p.ops.kappa_mass, p.u_fine)) + ',' +
         detail::fmt(energy_norm(p.ops.stiffness, p.u_fine)) + '\n';
  return {csv, p.u_fine};
}

/// Full vs random snapshots for k_nb ∈ {5, 10, 15, 20, 25}; full columns read
/// `-` above `full_max_knb`.
inline ExperimentOutput run_compare(const RunConfig& cfg, int threads = 1)
{
  const Problem p = make_problem(cfg, threads);
  ReductionConfig rand_cfg = reduction_config(cfg, threads);
  rand_cfg.mode = SnapshotMode::random;
  ReductionConfig full_cfg = rand_cfg;
  full_cfg.mode = SnapshotMode::full;

  const int k_max = table_k_values.back();
  const SnapshotCache rand_cache(p, rand_cfg, k_max + cfg.p_bf);
  std::optional<SnapshotCache> full_cache;
  if (cfg.full_max_knb >= table_k_values.front()) full_cache.emplace(p, full_cfg, 0);

  std::string csv = "k_nb,dim,ratio,l2_full,h1_full,l2_rand,h1_rand\n";
  Vector last;
  for (int k : table_k_values) {
    const int computed = k + cfg.p_bf;
    const double ratio = snapshot_ratio(p.geom, cfg.oversample_t, computed);
    const PipelineResult rand = coarse_pipeline(p, rand_cache.bases(k, computed), ratio);
    std::string full_cols = "-,-";
    if (full_cache && k <= cfg.full_max_knb) {
      const PipelineResult full = coarse_pipeline(p, full_cache->bases(k, 0), 100.0);
      full_cols = detail::fmt(full.report.l2_percent) + ',' + detail::fmt(full.report.h1_percent);
    }
    csv += std::to_string(k) + ',' + std::to_string(rand.report.dim) + ',' + detail::fmt(ratio) + ',' + full_cols +
           ',' + detail::fmt(rand.report.l2_percent) + ',' + detail::fmt(rand.report.h1_percent) + '\n';
    last = rand.solution;
  }
  return {csv, last};
}

/// Random snapshots with k_nb = 20 and p_bf ∈ {4, 10, 15, 20}.
inline ExperimentOutput run_buffer_study(const RunConfig& cfg, int threads = 1)
{
  const Problem p = make_problem(cfg, threads);
  ReductionConfig r = reduction_config(cfg, threads);
  r.mode = SnapshotMode::random;
  const int k = 20;
  const std::vector<int> buffers{4, 10, 15, 20};
  const SnapshotCache cache(p, r, k + buffers.back());
  std::string csv = "p_bf,k_nb,dim,ratio,l2_err,h1_err\n";
  for (int pb : buffers) {
    const double ratio = snapshot_ratio(p.geom, cfg.oversample_t, k + pb);
    const PipelineResult res = coarse_pipeline(p, cache.bases(k, k + pb), ratio);
    csv += std::to_string(pb) + ',' + std::to_string(k) + ',' + std::to_string(res.report.dim) + ',' +
           detail::fmt(ratio) + ',' + detail::fmt(res.report.l2_percent) + ',' + detail::fmt(res.report.h1_percent) +
           '\n';
  }
  return {csv, std::nullopt};
}

/// Random snapshots with k_nb = 20, the configured p_bf, and t ∈ {0, 2, 4, 7}.
inline ExperimentOutput run_oversampling_study(const RunConfig& cfg, int threads = 1)
{
  const Problem p = make_problem(cfg, threads);
  const int k = 20;
  std::string csv = "t,k_nb,p_bf,dim,ratio,l2_err,h1_err\n";
  for (int t : {0, 2, 4, 7}) {
    ReductionConfig r = reduction_config(cfg, threads);
    r.mode = SnapshotMode::random;
    r.oversampling = t;
    r.k_nb = k;
    const double ratio = snapshot_ratio(p.geom, t, k + cfg.p_bf);
    const PipelineResult res = coarse_pipeline(p, reduce_all(p.geom, p.field, p.weight, r), ratio);
    csv += std::to_string(t) + ',' + std::to_string(k) + ',' + std::to_string(cfg.p_bf) + ',' +
           std::to_string(res.report.dim) + ',' + detail::fmt(ratio) + ',' + detail::fmt(res.report.l2_percent) +
           ',' + detail::fmt(res.report.h1_percent) + '\n';
  }
  return {csv, std::nullopt};
}

/// Skin-layer vs random snapshots at equal offline dimension, k_nb ∈ {5, …, 25}.
inline ExperimentOutput run_skin_compare(const RunConfig& cfg, int threads = 1)
{
  const Problem p = make_problem(cfg, threads);
  ReductionConfig rand_cfg = reduction_config(cfg, threads);
  rand_cfg.mode = SnapshotMode::random;
  ReductionConfig skin_cfg = rand_cfg;
  skin_cfg.mode = SnapshotMode::skin;
  const int k_max = table_k_values.back();
  const SnapshotCache rand_cache(p, rand_cfg, k_max + cfg.p_bf);
  const SnapshotCache skin_cache(p, skin_cfg, skin_snapshot_count(k_max, cfg.p_bf));

  std::string csv = "k_nb,dim,rand_snapshots,l2_rand,h1_rand,skin_snapshots,l2_skin,h1_skin\n";
  for (int k : table_k_values) {
    const int n_rand = k + cfg.p_bf;
    const int n_skin = skin_snapshot_count(k, cfg.p_bf);
    const PipelineResult rand = coarse_pipeline(p, rand_cache.bases(k, n_rand), 0.0);
    const PipelineResult skin = coarse_pipeline(p, skin_cache.bases(k, n_skin), 0.0);
    csv += std::to_string(k) + ',' + std::to_string(rand.report.dim) + ',' + std::to_string(n_rand) + ',' +
           detail::fmt(rand.report.l2_percent) + ',' + detail::fmt(rand.report.h1_percent) + ',' +
           std::to_string(n_skin) + ',' + detail::fmt(skin.report.l2_percent) + ',' +
           detail::fmt(skin.report.h1_percent) + '\n';
  }
  return {csv, std::nullopt};
}

inline AdaptiveConfig adaptive_config(const RunConfig& cfg)
{
  AdaptiveConfig a;
  a.theta = cfg.theta;
  a.c_nb = cfg.c_nb;
  a.c_bf = cfg.c_bf;
  a.max_iter = cfg.max_iter;
  a.target_err = cfg.target_err;
  a.max_dim = static_cast<std::size_t>(cfg.max_dim);
  return a;
}

/// Adaptive enrichment from `k_nb` random modes per node.
inline ExperimentOutput run_adaptive(const RunConfig& cfg, int threads = 1)
{
  const Problem p = make_problem(cfg, threads);
  ReductionConfig r = reduction_config(cfg, threads);
  r.mode = SnapshotMode::random;
  const AdaptiveProblem ap{p.geom, p.field, p.weight, p.pou, p.ops, p.u_fine, p.f_nodal, p.g};
  std::vector<OfflineBasis> final_bases;
  const auto rows = adaptive_loop(ap, r, adaptive_config(cfg), &final_bases);
  std::string csv = "iter,dim,marked_count,l2_err,h1_err,sum_eta2\n";
  for (const auto& row : rows)
    csv += std::to_string(row.iter) + ',' + std::to_string(row.dim) + ',' + std::to_string(row.marked_count) + ',' +
           detail::fmt(row.l2_err) + ',' + detail::fmt(row.h1_err) + ',' + detail::fmt(row.sum_eta2) + '\n';
  return {csv, coarse_pipeline(p, final_bases, 0.0).solution};
}

/// One certificate per seed on the neighborhood of coarse node
/// (lemma_node_x, lemma_node_y).
inline std::vector<BoundCertificate> lemma_certificates(const RunConfig& cfg, int threads = 1)
{
  cfg.validate();
  const GridGeometry geom = build_geometry(cfg.coarse_nx, cfg.coarse_ny, cfg.fine_per_coarse);
  const CoefficientField field = make_field(geom, cfg);
  const PartitionOfUnity pou = build_pou(geom, field, cfg.pou_mode);
  const CoefficientField weight = mass_weight(geom, field, pou, cfg.kappa_tilde_mode);
  const Neighborhood nb =
    neighborhood(geom, geom.coarse_node_index(cfg.lemma_node_x, cfg.lemma_node_y), cfg.oversample_t);
  std::vector<BoundCertificate> out(static_cast<std::size_t>(cfg.lemma_seeds));
  parallel_for(out.size(), threads, [&](std::size_t s) {
    out[s] = lemma1_certificate(geom, field, weight, nb, cfg.lemma_k, cfg.lemma_l, cfg.seed + s, cfg.lemma_tests);
  });
  return out;
}

inline ExperimentOutput run_lemma_check(const RunConfig& cfg, int threads = 1)
{
  std::ostringstream out;
  write_certificate_header(out);
  for (const auto& c : lemma_certificates(cfg, threads)) write_certificate_row(out, c);
  return {out.str(), std::nullopt};
}

/// The coefficient field of `cfg` in the plain-text grid format.
inline std::string run_gen_field(const RunConfig& cfg)
{
  cfg.validate();
  const GridGeometry geom = build_geometry(cfg.coarse_nx, cfg.coarse_ny, cfg.fine_per_coarse);
  const CoefficientField field = make_field(geom, cfg);
  std::ostringstream out;
  write_grid_values(out, field.nx(), field.ny(), field.values());
  return out.str();
}

} // namespace gmsfem
