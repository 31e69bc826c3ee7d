#pragma once

/** @file pou.hpp
    @brief Partitions of unity subordinate to the coarse neighborhoods, and the
    weighted coefficient κ̃ built from them.
*/

#include "assembly.hpp"
#include "field.hpp"
#include "grid.hpp"
#include "parallel.hpp"

#include <array>
#include <cmath>
#include <string>
#include <vector>

namespace gmsfem {

enum class PouMode
{
  standard,  ///< bilinear coarse hats χ_i⁰
  multiscale ///< κ-harmonic in each coarse block, χ_i⁰ on block boundaries
};

inline std::string to_string(PouMode m) { return m == PouMode::standard ? "standard" : "multiscale"; }
inline PouMode parse_pou_mode(const std::string& s)
{
  if (s == "standard") return PouMode::standard;
  if (s == "multiscale") return PouMode::multiscale;
  throw ConfigError("unknown pou_mode '" + s + "' (expected standard|multiscale)");
}

struct PartitionOfUnity
{
  PouMode mode = PouMode::standard;
  std::vector<NodeBox> support; ///< ω_i per coarse node
  std::vector<Vector> chi;      ///< χ_i on the nodes of `support[i]`

  /// χ_i at global fine node (i, j); zero outside ω_i.
  [[nodiscard]] double value(int node, int i, int j) const
  {
    const auto& box = support[static_cast<std::size_t>(node)];
    return box.contains(i, j) ? chi[static_cast<std::size_t>(node)][box.local(i, j)] : 0.0;
  }
};

namespace detail {

inline double coarse_hat(const GridGeometry& geom, int node, int i, int j)
{
  const auto [ci, cj] = geom.coarse_node_fine_ij(node);
  const double n = geom.fine_per_coarse();
  const double hx = std::max(0.0, 1.0 - std::abs(i - ci) / n);
  const double hy = std::max(0.0, 1.0 - std::abs(j - cj) / n);
  return hx * hy;
}

} // namespace detail

inline PartitionOfUnity build_standard_pou(const GridGeometry& geom)
{
  PartitionOfUnity pou;
  pou.mode = PouMode::standard;
  for (int node = 0; node < geom.coarse_node_count(); ++node) {
    const NodeBox box = geom.omega(node);
    Vector v(static_cast<Eigen::Index>(box.node_count()));
    for (int j = box.j0; j <= box.j1; ++j)
      for (int i = box.i0; i <= box.i1; ++i) v[box.local(i, j)] = detail::coarse_hat(geom, node, i, j);
    pou.support.push_back(box);
    pou.chi.push_back(std::move(v));
  }
  return pou;
}

/// Per coarse block K: solve div(κ∇χ) = 0 in K with χ = χ_i⁰ on ∂K for each of
/// the four vertices of K.
inline PartitionOfUnity build_multiscale_pou(const GridGeometry& geom, const CoefficientField& field, int threads = 1)
{
  field.check_matches(geom);
  PartitionOfUnity pou = build_standard_pou(geom);
  pou.mode = PouMode::multiscale;

  const int nbx = geom.coarse_nx();
  const int nby = geom.coarse_ny();
  // Per-block results first, then scatter; blocks share only edge nodes where
  // every block reproduces χ_i⁰ exactly.
  std::vector<std::array<Vector, 4>> block_values(static_cast<std::size_t>(nbx * nby));
  parallel_for(block_values.size(), threads, [&](std::size_t b) {
    const int bx = static_cast<int>(b) % nbx;
    const int by = static_cast<int>(b) / nbx;
    const NodeBox box = geom.coarse_block(bx, by);
    const auto op = assemble_stiffness(geom, field, box);
    std::vector<int> perimeter;
    for (int k = 0; k < static_cast<int>(box.node_count()); ++k) {
      const auto [i, j] = box.ij(k);
      if (box.on_perimeter(i, j)) perimeter.push_back(k);
    }
    const DirichletSolver solver(op.matrix, perimeter);
    const std::array<int, 4> corners{geom.coarse_node_index(bx, by), geom.coarse_node_index(bx + 1, by),
                                     geom.coarse_node_index(bx + 1, by + 1), geom.coarse_node_index(bx, by + 1)};
    for (int c = 0; c < 4; ++c) {
      Vector g(static_cast<Eigen::Index>(solver.constrained().size()));
      for (std::size_t k = 0; k < solver.constrained().size(); ++k) {
        const auto [i, j] = box.ij(solver.constrained()[k]);
        g[static_cast<Eigen::Index>(k)] = detail::coarse_hat(geom, corners[c], i, j);
      }
      block_values[b][c] = solver.extend(g);
    }
  });

  for (int by = 0; by < nby; ++by)
    for (int bx = 0; bx < nbx; ++bx) {
      const NodeBox box = geom.coarse_block(bx, by);
      const std::array<int, 4> corners{geom.coarse_node_index(bx, by), geom.coarse_node_index(bx + 1, by),
                                       geom.coarse_node_index(bx + 1, by + 1), geom.coarse_node_index(bx, by + 1)};
      const auto& values = block_values[static_cast<std::size_t>(by * nbx + bx)];
      for (int c = 0; c < 4; ++c) {
        const auto node = static_cast<std::size_t>(corners[c]);
        const NodeBox& sup = pou.support[node];
        for (int k = 0; k < static_cast<int>(box.node_count()); ++k) {
          const auto [i, j] = box.ij(k);
          pou.chi[node][sup.local(i, j)] = values[c][k];
        }
      }
    }
  return pou;
}

inline PartitionOfUnity build_pou(const GridGeometry& geom, const CoefficientField& field, PouMode mode, int threads = 1)
{
  return mode == PouMode::standard ? build_standard_pou(geom) : build_multiscale_pou(geom, field, threads);
}

/// Gradient of the bilinear interpolant of `v` (box-local nodal values) at the
/// center of element (ei, ej).
inline std::array<double, 2> cell_center_gradient(const GridGeometry& geom, const NodeBox& box, const Vector& v, int ei,
                                                  int ej)
{
  const double v0 = v[box.local(ei, ej)];
  const double v1 = v[box.local(ei + 1, ej)];
  const double v2 = v[box.local(ei + 1, ej + 1)];
  const double v3 = v[box.local(ei, ej + 1)];
  return {((v1 - v0) + (v2 - v3)) / (2.0 * geom.hx()), ((v3 - v0) + (v2 - v1)) / (2.0 * geom.hy())};
}

/// κ̃_e = κ_e · Σ_i |∇χ_i|² evaluated at the center of element e.
inline CoefficientField weighted_kappa(const GridGeometry& geom, const CoefficientField& field,
                                       const PartitionOfUnity& pou)
{
  field.check_matches(geom);
  std::vector<double> sum(geom.element_count(), 0.0);
  for (std::size_t node = 0; node < pou.chi.size(); ++node) {
    const NodeBox& box = pou.support[node];
    for (int ej = box.j0; ej < box.j1; ++ej)
      for (int ei = box.i0; ei < box.i1; ++ei) {
        const auto g = cell_center_gradient(geom, box, pou.chi[node], ei, ej);
        sum[static_cast<std::size_t>(geom.element_index(ei, ej))] += g[0] * g[0] + g[1] * g[1];
      }
  }
  for (std::size_t e = 0; e < sum.size(); ++e) {
    sum[e] *= field[e];
    // a cell where every χ_i is locally constant would give 0; floor keeps κ̃ a valid weight
    if (!(sum[e] > 0.0)) sum[e] = field[e] * 1e-12;
  }
  return {geom.elements_x(), geom.elements_y(), std::move(sum)};
}

enum class KappaTildeMode
{
  kappa,       ///< κ̃ = κ
  pou_weighted ///< κ̃ = κ Σ|∇χ_i|²
};

inline std::string to_string(KappaTildeMode m) { return m == KappaTildeMode::kappa ? "kappa" : "pou_weighted"; }
inline KappaTildeMode parse_kappa_tilde_mode(const std::string& s)
{
  if (s == "kappa") return KappaTildeMode::kappa;
  if (s == "pou_weighted") return KappaTildeMode::pou_weighted;
  throw ConfigError("unknown kappa_tilde_mode '" + s + "' (expected kappa|pou_weighted)");
}

inline CoefficientField mass_weight(const GridGeometry& geom, const CoefficientField& field,
                                    const PartitionOfUnity& pou, KappaTildeMode mode)
{
  return mode == KappaTildeMode::kappa ? field : weighted_kappa(geom, field, pou);
}

} // namespace gmsfem
