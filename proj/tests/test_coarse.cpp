#include "oracles.hpp"

#include <gmsfem/coarse.hpp>

#include <gtest/gtest.h>

using namespace gmsfem;

namespace {

const ScalarFunction zero = [](double, double) { return 0.0; };
const ScalarFunction one = [](double, double) { return 1.0; };
const ScalarFunction plane = [](double x, double y) { return x + y; };

struct Problem
{
  GridGeometry g;
  CoefficientField f;
  PartitionOfUnity pou;
  GlobalOperators ops;
  Vector u;

  Problem(int nc, int n, unsigned seed, const ScalarFunction& rhs = one)
    : g(build_geometry(nc, nc, n))
    , f(oracle::random_field(g, seed, 1.0, 1e4))
    , pou(build_multiscale_pou(g, f))
    , ops(assemble_global(g, f))
    , u(fine_reference_solve(g, f, rhs, plane))
  {
  }

  CoarseSolution solve(const std::vector<OfflineBasis>& bases, const ScalarFunction& rhs = one) const
  {
    return solve_coarse(build_coarse_space(g, pou, bases), g, ops, interpolate(g, rhs), plane);
  }
};

std::vector<OfflineBasis> full_bases(const Problem& p, int k_nb)
{
  return reduce_all(p.g, p.f, p.f, {.mode = SnapshotMode::full, .oversampling = 2, .k_nb = k_nb});
}

} // namespace

TEST(CoarseSpace, LayoutAndBasisMatrix)
{
  const Problem p(3, 4, 1);
  const auto bases = reduce_all(p.g, p.f, p.f, {.mode = SnapshotMode::random, .oversampling = 1, .k_nb = 2, .p_bf = 2});
  const auto space = build_coarse_space(p.g, p.pou, bases);
  EXPECT_EQ(space.dim(), offline_dimension(p.g, 2));
  EXPECT_EQ(space.constrained.size(), 12u);
  EXPECT_EQ(space.modes_at(p.g.coarse_node_index(1, 1)), 3);
  EXPECT_EQ(space.modes_at(0), 1);
  const SparseMatrix phi = basis_matrix(p.g, space);
  // constant modes, rescaled to 1, reproduce the partition of unity
  Vector sum = Vector::Zero(phi.cols());
  for (int node = 0; node < p.g.coarse_node_count(); ++node) {
    const auto& row0 = bases[static_cast<std::size_t>(node)].modes.row(0);
    EXPECT_LE((row0.array() / row0.mean() - 1.0).abs().maxCoeff(), 1e-8);
    sum += phi.row(space.node_offset[static_cast<std::size_t>(node)]).transpose() / row0.mean();
  }
  EXPECT_LE((sum.array() - 1.0).abs().maxCoeff(), 1e-8);
}

TEST(CoarseSpace, RejectsInconsistentInput)
{
  const Problem p(3, 3, 1);
  auto bases = full_bases(p, 1);
  bases.pop_back();
  EXPECT_THROW(build_coarse_space(p.g, p.pou, bases), ConfigError);
  bases = full_bases(p, 1);
  bases[0].modes.array() *= 2.0;
  EXPECT_THROW(build_coarse_space(p.g, p.pou, bases), ConfigError);
  bases = full_bases(p, 1);
  std::swap(bases[0], bases[1]);
  EXPECT_THROW(build_coarse_space(p.g, p.pou, bases), ConfigError);
}

TEST(CoarseSolve, ReproducesPlaneForUniformField)
{
  const auto g = build_geometry(3, 3, 5);
  const auto f = CoefficientField::uniform(g, 3.0);
  const auto bases = reduce_all(g, f, f, {.mode = SnapshotMode::random, .oversampling = 1, .k_nb = 2, .p_bf = 2});
  const auto sol = solve_coarse(build_coarse_space(g, build_standard_pou(g), bases), g, f, zero, plane);
  const Vector exact = interpolate(g, plane);
  EXPECT_LE((sol.fine - exact).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(CoarseSolveProperty, GalerkinOrthogonality)
{
  for (unsigned seed = 1; seed <= 3; ++seed) {
    const Problem p(3, 4, seed);
    const auto bases = full_bases(p, 3);
    const auto space = build_coarse_space(p.g, p.pou, bases);
    const auto sol = solve_coarse(space, p.g, p.ops, interpolate(p.g, one), plane);
    const SparseMatrix phi = basis_matrix(p.g, space);
    const Vector r = phi * (p.ops.stiffness * (p.u - sol.fine));
    const double scale = energy_norm(p.ops.stiffness, p.u) * energy_norm(p.ops.stiffness, p.u - sol.fine) + 1e-300;
    for (Eigen::Index d = 0; d < r.size(); ++d) {
      if (std::find(space.constrained.begin(), space.constrained.end(), d) != space.constrained.end()) continue;
      const double nphi = energy_norm(p.ops.stiffness, phi.row(d).transpose());
      ASSERT_LE(std::abs(r[d]), 1e-7 * std::sqrt(scale) * nphi) << "dof " << d;
    }
    // boundary coefficients carry g at the coarse nodes
    for (std::size_t k = 0; k < space.constrained.size(); ++k) {
      const auto [i, j] = p.g.coarse_node_fine_ij(space.constrained_node[k]);
      EXPECT_DOUBLE_EQ(sol.coefficients[space.constrained[k]], p.g.x(i) + p.g.y(j));
    }
  }
}

TEST(CoarseSolveProperty, NestedFullSpacesReduceEnergyError)
{
  const Problem p(4, 4, 7);
  double prev = std::numeric_limits<double>::infinity();
  for (int k : {0, 1, 3, 6}) {
    const auto sol = p.solve(full_bases(p, k));
    const double err = error_report(p.u, sol.fine, p.ops, 0, 0.0).h1_percent;
    EXPECT_LE(err, prev * (1 + 1e-9)) << "k_nb " << k;
    prev = err;
  }
}

TEST(SolveSpd, MatchesCholeskyAndHandlesDependence)
{
  std::mt19937 rng(3);
  std::normal_distribution<double> n01;
  Matrix b(6, 6);
  for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = n01(rng);
  Matrix a = b * b.transpose() + Matrix::Identity(6, 6);
  a.row(2) *= 1e5;
  a.col(2) *= 1e5;
  const Vector rhs = Vector::LinSpaced(6, -1.0, 2.0);
  EXPECT_LE((solve_spd_scaled(a, rhs) - a.llt().solve(rhs)).norm(), 1e-10 * a.llt().solve(rhs).norm());

  // duplicated dof: a consistent system is still solved
  Matrix v(4, 3);
  for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = n01(rng);
  Matrix w(4, 4);
  w << v, v.col(0);
  const Matrix sing = w.transpose() * w;
  const Vector bs = w.transpose() * Vector::Ones(4);
  const Vector x = solve_spd_scaled(sing, bs);
  EXPECT_LE((sing * x - bs).norm(), 1e-9 * bs.norm());

  Matrix bad = Matrix::Identity(2, 2);
  bad(1, 1) = 0.0;
  EXPECT_THROW(solve_spd_scaled(bad, Vector::Ones(2)), NumericalError);
}

TEST(ErrorReport, RelativeNorms)
{
  const Problem p(2, 4, 5);
  const auto same = error_report(p.u, p.u, p.ops, 9, 12.5);
  EXPECT_EQ(same.l2_percent, 0.0);
  EXPECT_EQ(same.h1_percent, 0.0);
  EXPECT_EQ(same.dim, 9u);
  EXPECT_EQ(same.snapshot_ratio, 12.5);
  const auto half = error_report(p.u, 0.5 * p.u, p.ops, 0, 0.0);
  EXPECT_NEAR(half.l2_percent, 50.0, 1e-10);
  EXPECT_NEAR(half.h1_percent, 50.0, 1e-10);
  EXPECT_THROW(error_report(Vector::Zero(p.u.size()), p.u, p.ops, 0, 0.0), NumericalError);
}
