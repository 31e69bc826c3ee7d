#pragma once

/** @file snapshot.hpp
    @brief Snapshot spaces on a coarse neighborhood ω_i.

    Every snapshot is a discrete κ-harmonic function on a local region
    (ω_i^+ for full and random modes, ω_i for skin mode) restricted to the
    nodes of ω_i. Row 0 of every set is the constant function.
*/

#include "assembly.hpp"
#include "eigen.hpp"
#include "error.hpp"
#include "field.hpp"
#include "grid.hpp"
#include "random.hpp"

#include <cstdint>
#include <iomanip>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

namespace gmsfem {

enum class SnapshotMode
{
  full,
  random,
  skin
};

inline std::string to_string(SnapshotMode m)
{
  switch (m) {
  case SnapshotMode::full: return "full";
  case SnapshotMode::random: return "random";
  case SnapshotMode::skin: return "skin";
  }
  return "?";
}

inline SnapshotMode parse_snapshot_mode(const std::string& s)
{
  if (s == "full") return SnapshotMode::full;
  if (s == "random") return SnapshotMode::random;
  if (s == "skin") return SnapshotMode::skin;
  throw ConfigError("unknown snapshot_mode '" + s + "' (expected full|random|skin)");
}

/// Discrete harmonic extension on a box: Dirichlet on the whole perimeter,
/// data prescribed on the perimeter nodes off ∂D and zero on ∂D.
class LocalHarmonicSolver
{
public:
  LocalHarmonicSolver(const GridGeometry& geom, const CoefficientField& field, const NodeBox& region,
                      const NodeBox& target)
    : region_(region)
    , target_(target)
    , op_(assemble_stiffness(geom, field, region))
    , solver_(op_.matrix, perimeter(geom, region))
  {
    if (!region.contains(target)) throw ConfigError("target box is not inside the solve region");
    for (std::size_t c = 0; c < solver_.constrained().size(); ++c) {
      const auto [i, j] = region.ij(solver_.constrained()[c]);
      if (!geom.on_boundary(i, j)) data_slots_.push_back(static_cast<int>(c));
    }
  }

  [[nodiscard]] const NodeBox& region() const { return region_; }
  [[nodiscard]] const NodeBox& target() const { return target_; }
  [[nodiscard]] const SparseOperator& op() const { return op_; }
  [[nodiscard]] std::size_t data_count() const { return data_slots_.size(); }

  /// Global fine-node index of data slot `k` (ascending).
  [[nodiscard]] int data_node(const GridGeometry& geom, std::size_t k) const
  {
    const auto [i, j] = region_.ij(solver_.constrained()[static_cast<std::size_t>(data_slots_[k])]);
    return geom.node_index(i, j);
  }

  /// Harmonic extension of `data` (one value per data node) over `region`.
  [[nodiscard]] Vector extend(const Vector& data) const
  {
    if (data.size() != static_cast<Eigen::Index>(data_slots_.size())) throw ConfigError("snapshot data has wrong length");
    Vector g = Vector::Zero(static_cast<Eigen::Index>(solver_.constrained().size()));
    for (std::size_t k = 0; k < data_slots_.size(); ++k) g[data_slots_[k]] = data[static_cast<Eigen::Index>(k)];
    return solver_.extend(g);
  }

  /// Values of a region vector at the nodes of `target`.
  [[nodiscard]] Vector restrict_to_target(const Vector& v) const
  {
    Vector out(static_cast<Eigen::Index>(target_.node_count()));
    for (int j = target_.j0; j <= target_.j1; ++j)
      for (int i = target_.i0; i <= target_.i1; ++i) out[target_.local(i, j)] = v[region_.local(i, j)];
    return out;
  }

  /// max |(A v)_k| over non-perimeter nodes, relative to max|A_kk| · max|v|.
  [[nodiscard]] double interior_residual(const Vector& v) const
  {
    const Vector r = op_.matrix * v;
    double worst = 0.0;
    for (int k : solver_.free_nodes()) worst = std::max(worst, std::abs(r[k]));
    const double scale = op_.matrix.diagonal().cwiseAbs().maxCoeff() * std::max(v.cwiseAbs().maxCoeff(), 1e-300);
    return worst / scale;
  }

private:
  static std::vector<int> perimeter(const GridGeometry&, const NodeBox& region)
  {
    std::vector<int> out;
    for (int k = 0; k < static_cast<int>(region.node_count()); ++k) {
      const auto [i, j] = region.ij(k);
      if (region.on_perimeter(i, j)) out.push_back(k);
    }
    return out;
  }

  NodeBox region_;
  NodeBox target_;
  SparseOperator op_;
  DirichletSolver solver_;
  std::vector<int> data_slots_;
};

struct SnapshotSet
{
  int node = 0;
  SnapshotMode mode = SnapshotMode::full;
  NodeBox omega;
  /// One snapshot per row over the nodes of ω_i; row 0 is the constant.
  Matrix rows;
  /// Random mode: boundary data r_l, one row per random snapshot, over the data nodes.
  Matrix boundary_data;
  std::uint64_t seed = 0;
  int k_nb = 0;
  int p_bf = 0;
  int local_solves = 0;

  [[nodiscard]] Eigen::Index count() const { return rows.rows(); }

  /// The constant row plus the first `n` computed snapshots.
  [[nodiscard]] SnapshotSet head(int n) const
  {
    if (n < 0 || n + 1 > rows.rows()) throw ConfigError("snapshot head larger than the set");
    SnapshotSet s = *this;
    s.rows = rows.topRows(n + 1);
    if (boundary_data.rows() > 0) s.boundary_data = boundary_data.topRows(n);
    s.local_solves = n;
    return s;
  }
};

namespace detail {

inline SnapshotSet make_set(const Neighborhood& nb, SnapshotMode mode, Eigen::Index computed)
{
  SnapshotSet s;
  s.node = nb.node;
  s.mode = mode;
  s.omega = nb.omega;
  s.rows.resize(computed + 1, static_cast<Eigen::Index>(nb.omega.node_count()));
  s.rows.row(0).setOnes();
  s.local_solves = static_cast<int>(computed);
  return s;
}

} // namespace detail

/// One harmonic solve on ω_i^+ per data node of ∂ω_i^+ with Kronecker-δ data.
inline SnapshotSet full_snapshots(const GridGeometry& geom, const CoefficientField& field, const Neighborhood& nb)
{
  const LocalHarmonicSolver local(geom, field, nb.oversampled, nb.omega);
  const auto n = static_cast<Eigen::Index>(local.data_count());
  SnapshotSet s = detail::make_set(nb, SnapshotMode::full, n);
  for (Eigen::Index l = 0; l < n; ++l) {
    Vector delta = Vector::Zero(n);
    delta[l] = 1.0;
    s.rows.row(l + 1) = local.restrict_to_target(local.extend(delta)).transpose();
  }
  return s;
}

/// `k_nb + p_bf` harmonic solves on ω_i^+ with i.i.d. N(0,1) boundary data.
/// The stream is seeded by (seed, node), so the result does not depend on the
/// order in which neighborhoods are processed, and a smaller request yields a
/// prefix of a larger one.
inline SnapshotSet random_snapshots(const GridGeometry& geom, const CoefficientField& field, const Neighborhood& nb,
                                    int k_nb, int p_bf, std::uint64_t seed, std::uint64_t stream = 0)
{
  if (k_nb < 1) throw ConfigError("k_nb must be >= 1");
  if (p_bf < 0) throw ConfigError("p_bf must be >= 0");
  const LocalHarmonicSolver local(geom, field, nb.oversampled, nb.omega);
  const auto n = static_cast<Eigen::Index>(local.data_count());
  if (n == 0) throw ConfigError("neighborhood has no boundary data nodes");
  const Eigen::Index l = k_nb + p_bf;

  SnapshotSet s = detail::make_set(nb, SnapshotMode::random, l);
  s.seed = seed;
  s.k_nb = k_nb;
  s.p_bf = p_bf;
  s.boundary_data.resize(l, n);
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(nb.node), stream}));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index r = 0; r < l; ++r)
    for (Eigen::Index c = 0; c < n; ++c) s.boundary_data(r, c) = normal(rng);
  for (Eigen::Index r = 0; r < l; ++r)
    s.rows.row(r + 1) = local.restrict_to_target(local.extend(s.boundary_data.row(r).transpose())).transpose();
  return s;
}

/// Smallest-eigenvalue modes of the stiffness/mass pencil on the skin layer
/// L_i, traced onto ∂ω_i and harmonically extended into ω_i.
inline SnapshotSet skin_snapshots(const GridGeometry& geom, const CoefficientField& field,
                                  const CoefficientField& mass_weight, const Neighborhood& nb, int count)
{
  if (count < 1) throw ConfigError("skin snapshot count must be >= 1");
  if (nb.skin_nodes.empty()) throw ConfigError("skin layer is empty");

  const NodeBox& outer = nb.skin_outer;
  std::vector<int> strip_index(outer.node_count(), -1);
  for (std::size_t k = 0; k < nb.skin_nodes.size(); ++k) {
    const int g = nb.skin_nodes[k];
    strip_index[static_cast<std::size_t>(outer.local(g % geom.nodes_x(), g / geom.nodes_x()))] = static_cast<int>(k);
  }
  const auto n_strip = static_cast<Eigen::Index>(nb.skin_nodes.size());
  auto keep = [&](int ei, int ej) { return detail::in_skin(outer, nb.skin_inner, ei, ej); };
  auto local = [&](int i, int j) { return strip_index[static_cast<std::size_t>(outer.local(i, j))]; };
  const Matrix a =
    Matrix(detail::assemble(geom, field.values(), outer, element_stiffness(geom.hx(), geom.hy()), n_strip, keep, local));
  const Matrix m = Matrix(
    detail::assemble(geom, mass_weight.values(), outer, element_mass(geom.hx(), geom.hy()), n_strip, keep, local));
  const Eigenpairs strip = generalized_eigen_spd(a, m);
  if (count > strip.values.size()) throw ConfigError("skin snapshot count exceeds skin layer size");

  const LocalHarmonicSolver ext(geom, field, nb.omega, nb.omega);
  const auto n_data = static_cast<Eigen::Index>(ext.data_count());
  SnapshotSet s = detail::make_set(nb, SnapshotMode::skin, count);
  for (Eigen::Index r = 0; r < count; ++r) {
    Vector trace(n_data);
    for (Eigen::Index k = 0; k < n_data; ++k) {
      const int g = ext.data_node(geom, static_cast<std::size_t>(k));
      const int slot = strip_index[static_cast<std::size_t>(outer.local(g % geom.nodes_x(), g / geom.nodes_x()))];
      if (slot < 0) throw ConfigError("skin layer does not cover the neighborhood boundary");
      trace[k] = strip.vectors(slot, r);
    }
    s.rows.row(r + 1) = ext.extend(trace).transpose();
  }
  return s;
}

/// Debug dump: header `rows cols`, one snapshot per line.
inline void write_snapshots(std::ostream& out, const SnapshotSet& s)
{
  out << "# node " << s.node << " mode " << to_string(s.mode) << '\n' << s.rows.rows() << ' ' << s.rows.cols() << '\n';
  const auto old = out.precision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index r = 0; r < s.rows.rows(); ++r) {
    for (Eigen::Index c = 0; c < s.rows.cols(); ++c) out << (c ? " " : "") << s.rows(r, c);
    out << '\n';
  }
  out.precision(old);
}

} // namespace gmsfem
