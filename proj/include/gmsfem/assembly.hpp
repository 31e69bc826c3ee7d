#pragma once

/** @file assembly.hpp
    @brief Bilinear (Q1) finite element assembly on rectangular fine elements and
    Dirichlet-constrained sparse solves.

    Coefficients are constant per fine element, so element integrals are exact.
    Local node order within an element: (0,0), (1,0), (1,1), (0,1).
*/

#include "error.hpp"
#include "field.hpp"
#include "grid.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <array>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace gmsfem {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using ElementMatrix = Eigen::Matrix4d;

/// Sparse symmetric operator over the nodes of `region` (box-local numbering).
struct SparseOperator
{
  NodeBox region;
  SparseMatrix matrix;
};

/// Q1 stiffness of a `hx` x `hy` rectangle with unit coefficient.
inline ElementMatrix element_stiffness(double hx, double hy)
{
  ElementMatrix ax, ay;
  // ∫ ∂x φi ∂x φj and ∂y φi ∂y φj on the reference unit square, times 6
  ax << 2, -2, -1, 1, //
    -2, 2, 1, -1,     //
    -1, 1, 2, -2,     //
    1, -1, -2, 2;
  ay << 2, 1, -1, -2, //
    1, 2, -2, -1,     //
    -1, -2, 2, 1,     //
    -2, -1, 1, 2;
  return (hy / hx) / 6.0 * ax + (hx / hy) / 6.0 * ay;
}

/// Q1 consistent mass of a `hx` x `hy` rectangle with unit weight.
inline ElementMatrix element_mass(double hx, double hy)
{
  ElementMatrix m;
  m << 4, 2, 1, 2, //
    2, 4, 2, 1,    //
    1, 2, 4, 2,    //
    2, 1, 2, 4;
  return hx * hy / 36.0 * m;
}

namespace detail {

/// Assemble `weight(e) * reference` over every element of `region` for which
/// `keep(ei, ej)` holds; node numbering supplied by `local(i, j)`.
template <class Keep, class Local>
SparseMatrix assemble(const GridGeometry& geom, std::span<const double> weights, const NodeBox& region,
                      const ElementMatrix& reference, Eigen::Index n, Keep keep, Local local)
{
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(region.element_count() * 16);
  for (int ej = region.j0; ej < region.j1; ++ej)
    for (int ei = region.i0; ei < region.i1; ++ei) {
      if (!keep(ei, ej)) continue;
      const double w = weights[static_cast<std::size_t>(geom.element_index(ei, ej))];
      const std::array<int, 4> dofs{local(ei, ej), local(ei + 1, ej), local(ei + 1, ej + 1), local(ei, ej + 1)};
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) triplets.emplace_back(dofs[a], dofs[b], w * reference(a, b));
    }
  SparseMatrix m(n, n);
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

inline void check_region(const GridGeometry& geom, const NodeBox& region)
{
  if (region.empty()) throw ConfigError("assembly region is empty");
  if (!geom.domain().contains(region)) throw ConfigError("assembly region lies outside the grid");
}

} // namespace detail

inline SparseOperator assemble_stiffness(const GridGeometry& geom, const CoefficientField& field, const NodeBox& region)
{
  field.check_matches(geom);
  detail::check_region(geom, region);
  auto m = detail::assemble(
    geom, field.values(), region, element_stiffness(geom.hx(), geom.hy()), static_cast<Eigen::Index>(region.node_count()),
    [](int, int) { return true; }, [&](int i, int j) { return region.local(i, j); });
  return {region, std::move(m)};
}

inline SparseOperator assemble_mass(const GridGeometry& geom, const CoefficientField& weight, const NodeBox& region)
{
  weight.check_matches(geom);
  detail::check_region(geom, region);
  auto m = detail::assemble(
    geom, weight.values(), region, element_mass(geom.hx(), geom.hy()), static_cast<Eigen::Index>(region.node_count()),
    [](int, int) { return true; }, [&](int i, int j) { return region.local(i, j); });
  return {region, std::move(m)};
}

/// Cholesky factorization of an operator with a fixed set of Dirichlet nodes,
/// reusable for many right-hand sides and boundary data.
///
/// Constrained rows and columns are eliminated; their coupling moves to the
/// right-hand side, so the reduced system stays symmetric positive definite.
class DirichletSolver
{
public:
  static constexpr double tolerance = 1e-10;

  DirichletSolver(const SparseMatrix& a, std::span<const int> constrained)
    : n_(a.rows())
    , free_index_(static_cast<std::size_t>(a.rows()), -1)
  {
    if (a.rows() != a.cols()) throw ConfigError("operator is not square");
    if (constrained.empty()) throw ConfigError("Dirichlet solve needs at least one constrained node");
    std::vector<bool> fixed(static_cast<std::size_t>(n_), false);
    for (int c : constrained) {
      if (c < 0 || c >= n_) throw ConfigError("constrained node index out of range");
      fixed[static_cast<std::size_t>(c)] = true;
    }
    for (Eigen::Index k = 0; k < n_; ++k) {
      if (fixed[static_cast<std::size_t>(k)]) {
        free_index_[static_cast<std::size_t>(k)] = -1 - static_cast<int>(constrained_.size());
        constrained_.push_back(static_cast<int>(k));
      } else {
        free_index_[static_cast<std::size_t>(k)] = static_cast<int>(free_.size());
        free_.push_back(static_cast<int>(k));
      }
    }

    std::vector<Eigen::Triplet<double>> ff, fc;
    for (int col = 0; col < a.outerSize(); ++col)
      for (SparseMatrix::InnerIterator it(a, col); it; ++it) {
        const int r = free_index_[static_cast<std::size_t>(it.row())];
        const int c = free_index_[static_cast<std::size_t>(it.col())];
        if (r < 0) continue;
        if (c >= 0)
          ff.emplace_back(r, c, it.value());
        else
          fc.emplace_back(r, -1 - c, it.value());
      }
    const auto nf = static_cast<Eigen::Index>(free_.size());
    a_ff_.resize(nf, nf);
    a_ff_.setFromTriplets(ff.begin(), ff.end());
    a_fc_.resize(nf, static_cast<Eigen::Index>(constrained_.size()));
    a_fc_.setFromTriplets(fc.begin(), fc.end());
    if (nf > 0) {
      llt_.compute(a_ff_);
      if (llt_.info() != Eigen::Success) throw NumericalError("Cholesky factorization of constrained operator failed");
    }
  }

  [[nodiscard]] Eigen::Index size() const { return n_; }
  [[nodiscard]] const std::vector<int>& constrained() const { return constrained_; }
  [[nodiscard]] const std::vector<int>& free_nodes() const { return free_; }

  /// Solve with load `rhs` (full length) and `boundary_values` ordered like
  /// `constrained()` (ascending node index).
  [[nodiscard]] Vector solve(const Vector& rhs, const Vector& boundary_values) const
  {
    if (rhs.size() != n_) throw ConfigError("right-hand side has wrong length");
    if (boundary_values.size() != static_cast<Eigen::Index>(constrained_.size()))
      throw ConfigError("boundary data has wrong length");
    Vector x(n_);
    for (std::size_t c = 0; c < constrained_.size(); ++c)
      x[constrained_[c]] = boundary_values[static_cast<Eigen::Index>(c)];
    if (free_.empty()) return x;

    Vector b(static_cast<Eigen::Index>(free_.size()));
    for (std::size_t f = 0; f < free_.size(); ++f) b[static_cast<Eigen::Index>(f)] = rhs[free_[f]];
    b -= a_fc_ * boundary_values;

    Vector xf = llt_.solve(b);
    double res = relative_residual(b, xf);
    // one step of iterative refinement recovers most of what pivoting-free Cholesky loses
    if (res > tolerance) {
      xf += llt_.solve(Vector(b - a_ff_ * xf));
      res = relative_residual(b, xf);
    }
    if (res > tolerance)
      throw NumericalError("constrained solve residual " + std::to_string(res) + " exceeds " + std::to_string(tolerance));
    for (std::size_t f = 0; f < free_.size(); ++f) x[free_[f]] = xf[static_cast<Eigen::Index>(f)];
    return x;
  }

  /// Harmonic extension: zero load, given boundary values.
  [[nodiscard]] Vector extend(const Vector& boundary_values) const { return solve(Vector::Zero(n_), boundary_values); }

private:
  [[nodiscard]] double relative_residual(const Vector& b, const Vector& xf) const
  {
    const double nb = b.norm();
    const double nr = (b - a_ff_ * xf).norm();
    return nb > 0.0 ? nr / nb : nr;
  }

  Eigen::Index n_;
  std::vector<int> free_index_; // >= 0: free slot, < 0: -1 - constrained slot
  std::vector<int> free_;
  std::vector<int> constrained_;
  SparseMatrix a_ff_;
  SparseMatrix a_fc_;
  Eigen::SimplicialLLT<SparseMatrix> llt_;
};

/// One-shot constrained solve; `boundary_nodes` are operator-local and may be in any order.
inline Vector solve_dirichlet(const SparseOperator& op, const Vector& rhs, std::span<const int> boundary_nodes,
                              std::span<const double> boundary_values)
{
  if (boundary_nodes.size() != boundary_values.size()) throw ConfigError("boundary nodes and values differ in length");
  DirichletSolver solver(op.matrix, boundary_nodes);
  std::vector<double> by_node(static_cast<std::size_t>(op.matrix.rows()), 0.0);
  for (std::size_t k = 0; k < boundary_nodes.size(); ++k)
    by_node[static_cast<std::size_t>(boundary_nodes[k])] = boundary_values[k];
  Vector g(static_cast<Eigen::Index>(solver.constrained().size()));
  for (std::size_t c = 0; c < solver.constrained().size(); ++c)
    g[static_cast<Eigen::Index>(c)] = by_node[static_cast<std::size_t>(solver.constrained()[c])];
  return solver.solve(rhs, g);
}

using ScalarFunction = std::function<double(double, double)>;

/// Nodal interpolant of `fn` over the full grid.
inline Vector interpolate(const GridGeometry& geom, const ScalarFunction& fn)
{
  Vector v(static_cast<Eigen::Index>(geom.node_count()));
  for (int j = 0; j < geom.nodes_y(); ++j)
    for (int i = 0; i < geom.nodes_x(); ++i) v[geom.node_index(i, j)] = fn(geom.x(i), geom.y(j));
  return v;
}

/// Global operators shared by fine and coarse solves and by error norms.
struct GlobalOperators
{
  SparseMatrix stiffness;   ///< ∫ κ ∇u·∇v
  SparseMatrix kappa_mass;  ///< ∫ κ u v
  SparseMatrix unit_mass;   ///< ∫ u v, used for load vectors
};

inline GlobalOperators assemble_global(const GridGeometry& geom, const CoefficientField& field)
{
  const NodeBox d = geom.domain();
  return {assemble_stiffness(geom, field, d).matrix, assemble_mass(geom, field, d).matrix,
          assemble_mass(geom, CoefficientField::uniform(geom, 1.0), d).matrix};
}

inline std::vector<int> global_boundary_nodes(const GridGeometry& geom)
{
  std::vector<int> out;
  for (int j = 0; j < geom.nodes_y(); ++j)
    for (int i = 0; i < geom.nodes_x(); ++i)
      if (geom.on_boundary(i, j)) out.push_back(geom.node_index(i, j));
  return out;
}

/// Fine-scale Q1 solution of -div(κ∇u) = f in D, u = g on ∂D.
inline Vector fine_reference_solve(const GridGeometry& geom, const CoefficientField& field, const ScalarFunction& f,
                                   const ScalarFunction& g)
{
  const auto ops = assemble_global(geom, field);
  const Vector load = ops.unit_mass * interpolate(geom, f);
  const auto boundary = global_boundary_nodes(geom);
  const Vector gv = interpolate(geom, g);
  Vector values(static_cast<Eigen::Index>(boundary.size()));
  for (std::size_t k = 0; k < boundary.size(); ++k) values[static_cast<Eigen::Index>(k)] = gv[boundary[k]];
  return DirichletSolver(ops.stiffness, boundary).solve(load, values);
}

/// (vᵀ A v)^{1/2}
inline double energy_norm(const SparseMatrix& a, const Vector& v) { return std::sqrt(std::max(0.0, v.dot(a * v))); }

} // namespace gmsfem
