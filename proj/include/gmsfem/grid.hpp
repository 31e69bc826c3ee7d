#pragma once

/** @file grid.hpp
    @brief Structured fine/coarse grids on the unit square and the index sets
    derived from them: coarse neighborhoods, oversampled regions and skin layers.

    Fine nodes are numbered row-major with the bottom row first,
    `node = j * nodes_x + i`. Regions are axis-aligned boxes of fine nodes.
*/

#include "error.hpp"

#include <algorithm>
#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace gmsfem {

/// Inclusive box of fine-grid nodes `[i0, i1] x [j0, j1]`. Elements covered are
/// `[i0, i1) x [j0, j1)`.
struct NodeBox
{
  int i0 = 0;
  int j0 = 0;
  int i1 = 0;
  int j1 = 0;

  [[nodiscard]] int nodes_x() const { return i1 - i0 + 1; }
  [[nodiscard]] int nodes_y() const { return j1 - j0 + 1; }
  [[nodiscard]] int elements_x() const { return i1 - i0; }
  [[nodiscard]] int elements_y() const { return j1 - j0; }
  [[nodiscard]] std::size_t node_count() const { return static_cast<std::size_t>(nodes_x()) * nodes_y(); }
  [[nodiscard]] std::size_t element_count() const { return static_cast<std::size_t>(elements_x()) * elements_y(); }
  [[nodiscard]] bool empty() const { return i1 <= i0 || j1 <= j0; }

  [[nodiscard]] bool contains(int i, int j) const { return i >= i0 && i <= i1 && j >= j0 && j <= j1; }
  [[nodiscard]] bool contains(const NodeBox& o) const { return o.i0 >= i0 && o.i1 <= i1 && o.j0 >= j0 && o.j1 <= j1; }
  [[nodiscard]] bool on_perimeter(int i, int j) const
  {
    return contains(i, j) && (i == i0 || i == i1 || j == j0 || j == j1);
  }
  /// Box-local node number.
  [[nodiscard]] int local(int i, int j) const { return (j - j0) * nodes_x() + (i - i0); }
  [[nodiscard]] std::array<int, 2> ij(int local_index) const
  {
    return {i0 + local_index % nodes_x(), j0 + local_index / nodes_x()};
  }

  /// Grow (or shrink, for negative `layers`) by whole fine layers, clipped to `clip`.
  [[nodiscard]] NodeBox expanded(int layers, const NodeBox& clip) const
  {
    return {std::max(i0 - layers, clip.i0), std::max(j0 - layers, clip.j0), std::min(i1 + layers, clip.i1),
            std::min(j1 + layers, clip.j1)};
  }

  friend bool operator==(const NodeBox&, const NodeBox&) = default;
};

class GridGeometry
{
public:
  GridGeometry(int coarse_nx, int coarse_ny, int fine_per_coarse)
    : coarse_nx_(coarse_nx)
    , coarse_ny_(coarse_ny)
    , fine_per_coarse_(fine_per_coarse)
  {
    if (coarse_nx < 1 || coarse_ny < 1 || fine_per_coarse < 1)
      throw ConfigError("grid counts must be >= 1 (got " + std::to_string(coarse_nx) + ", " +
                        std::to_string(coarse_ny) + ", " + std::to_string(fine_per_coarse) + ")");
  }

  [[nodiscard]] int coarse_nx() const { return coarse_nx_; }
  [[nodiscard]] int coarse_ny() const { return coarse_ny_; }
  [[nodiscard]] int fine_per_coarse() const { return fine_per_coarse_; }

  [[nodiscard]] int elements_x() const { return coarse_nx_ * fine_per_coarse_; }
  [[nodiscard]] int elements_y() const { return coarse_ny_ * fine_per_coarse_; }
  [[nodiscard]] int nodes_x() const { return elements_x() + 1; }
  [[nodiscard]] int nodes_y() const { return elements_y() + 1; }
  [[nodiscard]] std::size_t node_count() const { return static_cast<std::size_t>(nodes_x()) * nodes_y(); }
  [[nodiscard]] std::size_t element_count() const { return static_cast<std::size_t>(elements_x()) * elements_y(); }

  [[nodiscard]] double hx() const { return 1.0 / elements_x(); }
  [[nodiscard]] double hy() const { return 1.0 / elements_y(); }
  [[nodiscard]] double x(int i) const { return static_cast<double>(i) / elements_x(); }
  [[nodiscard]] double y(int j) const { return static_cast<double>(j) / elements_y(); }

  [[nodiscard]] int node_index(int i, int j) const { return j * nodes_x() + i; }
  [[nodiscard]] int element_index(int i, int j) const { return j * elements_x() + i; }
  [[nodiscard]] bool on_boundary(int i, int j) const
  {
    return i == 0 || j == 0 || i == elements_x() || j == elements_y();
  }

  [[nodiscard]] NodeBox domain() const { return {0, 0, elements_x(), elements_y()}; }

  /// Coarse block `(bx, by)` containing fine element `(i, j)`.
  [[nodiscard]] std::array<int, 2> coarse_block_of_element(int i, int j) const
  {
    return {i / fine_per_coarse_, j / fine_per_coarse_};
  }
  [[nodiscard]] NodeBox coarse_block(int bx, int by) const
  {
    const int n = fine_per_coarse_;
    return {bx * n, by * n, (bx + 1) * n, (by + 1) * n};
  }

  // Coarse vertices x_i, numbered row-major like fine nodes.
  [[nodiscard]] int coarse_nodes_x() const { return coarse_nx_ + 1; }
  [[nodiscard]] int coarse_nodes_y() const { return coarse_ny_ + 1; }
  [[nodiscard]] int coarse_node_count() const { return coarse_nodes_x() * coarse_nodes_y(); }
  [[nodiscard]] int coarse_node_index(int ci, int cj) const { return cj * coarse_nodes_x() + ci; }
  [[nodiscard]] std::array<int, 2> coarse_node_ij(int node) const
  {
    check_coarse_node(node);
    return {node % coarse_nodes_x(), node / coarse_nodes_x()};
  }
  [[nodiscard]] bool is_interior_coarse_node(int node) const
  {
    const auto [ci, cj] = coarse_node_ij(node);
    return ci > 0 && cj > 0 && ci < coarse_nx_ && cj < coarse_ny_;
  }
  [[nodiscard]] int interior_coarse_node_count() const { return (coarse_nx_ - 1) * (coarse_ny_ - 1); }
  /// Fine-node coordinates of coarse vertex `node`.
  [[nodiscard]] std::array<int, 2> coarse_node_fine_ij(int node) const
  {
    const auto [ci, cj] = coarse_node_ij(node);
    return {ci * fine_per_coarse_, cj * fine_per_coarse_};
  }

  void check_coarse_node(int node) const
  {
    if (node < 0 || node >= coarse_node_count())
      throw ConfigError("coarse node index " + std::to_string(node) + " out of range [0, " +
                        std::to_string(coarse_node_count()) + ")");
  }

  /// Union of the coarse blocks whose closure contains coarse vertex `node`.
  [[nodiscard]] NodeBox omega(int node) const
  {
    const auto [ci, cj] = coarse_node_ij(node);
    const int n = fine_per_coarse_;
    return {std::max(ci - 1, 0) * n, std::max(cj - 1, 0) * n, std::min(ci + 1, coarse_nx_) * n,
            std::min(cj + 1, coarse_ny_) * n};
  }

private:
  int coarse_nx_;
  int coarse_ny_;
  int fine_per_coarse_;
};

inline GridGeometry build_geometry(int coarse_nx, int coarse_ny, int fine_per_coarse)
{
  return GridGeometry(coarse_nx, coarse_ny, fine_per_coarse);
}

/// Width of the skin layer straddling the boundary of a neighborhood.
struct SkinWidth
{
  int inside = 2;
  int outside = 3;
};

struct Neighborhood
{
  int node = 0;
  bool interior = false;
  int oversampling = 0;
  NodeBox omega;       ///< ω_i
  NodeBox oversampled; ///< ω_i^+ (ω_i grown by `oversampling` fine layers, clipped to the domain)
  /// Global indices of all perimeter nodes of ω_i^+ (Dirichlet set of local solves).
  std::vector<int> boundary_nodes;
  /// Perimeter nodes of ω_i^+ not on the global boundary; snapshot data lives here.
  std::vector<int> data_nodes;
  /// Skin layer: elements of `skin_outer` not inside `skin_inner`.
  NodeBox skin_outer;
  NodeBox skin_inner;
  std::vector<int> skin_nodes; ///< global node indices, ascending
};

namespace detail {

inline std::vector<int> perimeter_nodes(const GridGeometry& geom, const NodeBox& box, bool skip_global_boundary)
{
  std::vector<int> out;
  for (int j = box.j0; j <= box.j1; ++j)
    for (int i = box.i0; i <= box.i1; ++i) {
      if (!box.on_perimeter(i, j)) continue;
      if (skip_global_boundary && geom.on_boundary(i, j)) continue;
      out.push_back(geom.node_index(i, j));
    }
  return out;
}

inline bool in_skin(const NodeBox& outer, const NodeBox& inner, int ei, int ej)
{
  if (ei < outer.i0 || ei >= outer.i1 || ej < outer.j0 || ej >= outer.j1) return false;
  const bool inside_inner = !inner.empty() && ei >= inner.i0 && ei < inner.i1 && ej >= inner.j0 && ej < inner.j1;
  return !inside_inner;
}

} // namespace detail

inline Neighborhood neighborhood(const GridGeometry& geom, int node, int oversampling, SkinWidth skin = {})
{
  geom.check_coarse_node(node);
  if (oversampling < 0) throw ConfigError("oversampling width must be >= 0");
  if (skin.inside < 0 || skin.outside < 0) throw ConfigError("skin widths must be >= 0");

  Neighborhood nb;
  nb.node = node;
  nb.interior = geom.is_interior_coarse_node(node);
  nb.oversampling = oversampling;
  nb.omega = geom.omega(node);
  nb.oversampled = nb.omega.expanded(oversampling, geom.domain());
  nb.boundary_nodes = detail::perimeter_nodes(geom, nb.oversampled, false);
  nb.data_nodes = detail::perimeter_nodes(geom, nb.oversampled, true);

  nb.skin_outer = nb.omega.expanded(skin.outside, geom.domain());
  const NodeBox& w = nb.omega;
  nb.skin_inner = {w.i0 + skin.inside, w.j0 + skin.inside, w.i1 - skin.inside, w.j1 - skin.inside};
  if (nb.skin_inner.i1 < nb.skin_inner.i0 || nb.skin_inner.j1 < nb.skin_inner.j0) nb.skin_inner = {0, 0, 0, 0};

  const NodeBox& o = nb.skin_outer;
  for (int j = o.j0; j <= o.j1; ++j)
    for (int i = o.i0; i <= o.i1; ++i) {
      // a node belongs to the layer if any adjacent element does
      bool hit = false;
      for (int dj = -1; dj <= 0 && !hit; ++dj)
        for (int di = -1; di <= 0 && !hit; ++di) hit = detail::in_skin(o, nb.skin_inner, i + di, j + dj);
      if (hit) nb.skin_nodes.push_back(geom.node_index(i, j));
    }
  return nb;
}

} // namespace gmsfem
