#include "oracles.hpp"

#include <gmsfem/adaptive.hpp>

#include <gtest/gtest.h>

using namespace gmsfem;

namespace {

const ScalarFunction one = [](double, double) { return 1.0; };
const ScalarFunction plane = [](double x, double y) { return x + y; };

struct Case
{
  GridGeometry g = build_geometry(4, 4, 4);
  CoefficientField f = oracle::random_field(g, 13, 1.0, 1e4);
  PartitionOfUnity pou = build_multiscale_pou(g, f);
  GlobalOperators ops = assemble_global(g, f);
  Vector f_nodal = interpolate(g, one);
  Vector u = fine_reference_solve(g, f, one, plane);

  [[nodiscard]] AdaptiveProblem problem() const { return {g, f, f, pou, ops, u, f_nodal, plane}; }
};

IndicatorReport report(std::initializer_list<std::pair<int, double>> items)
{
  IndicatorReport r;
  for (auto [node, eta2] : items) r.nodes.push_back({node, 0.0, 1.0, eta2});
  return r;
}

} // namespace

TEST(Marking, BulkCriterion)
{
  const auto r = report({{5, 1.0}, {6, 4.0}, {7, 2.0}, {8, 3.0}});
  EXPECT_EQ(mark(r, 0.3), (std::vector<int>{6}));
  EXPECT_EQ(mark(r, 0.4), (std::vector<int>{6}));
  EXPECT_EQ(mark(r, 0.5), (std::vector<int>{6, 8}));
  EXPECT_EQ(mark(r, 0.9), (std::vector<int>{6, 7, 8}));
  EXPECT_EQ(mark(r, 1.0), (std::vector<int>{5, 6, 7, 8}));
  EXPECT_EQ(mark(r, 0.3, {6}), (std::vector<int>{8}));
  EXPECT_THROW(mark(r, 0.0), ConfigError);
  EXPECT_THROW(mark(r, 1.5), ConfigError);
}

TEST(Marking, TiesAndZeros)
{
  EXPECT_EQ(mark(report({{9, 2.0}, {3, 2.0}, {4, 0.0}}), 0.5), (std::vector<int>{3}));
  EXPECT_EQ(mark(report({{9, 2.0}, {3, 2.0}, {4, 0.0}}), 1.0), (std::vector<int>{3, 9}));
  EXPECT_TRUE(mark(report({{1, 0.0}, {2, 0.0}}), 0.5).empty());
  EXPECT_TRUE(mark(report({}), 0.5).empty());
}

TEST(MarkingProperty, SmallestSetReachingTheta)
{
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    IndicatorReport r;
    for (int n = 0; n < 12; ++n) r.nodes.push_back({n, 0.0, 1.0, u(rng)});
    const double theta = 0.05 + 0.9 * u(rng);
    const auto marked = mark(r, theta);
    std::vector<double> sorted;
    for (const auto& n : r.nodes) sorted.push_back(n.eta2);
    std::sort(sorted.rbegin(), sorted.rend());
    double total = 0.0, sum = 0.0;
    for (double e : sorted) total += e;
    std::size_t need = 0;
    while (sum < theta * total) sum += sorted[need++];
    EXPECT_EQ(marked.size(), need);
    double marked_sum = 0.0;
    for (int n : marked) marked_sum += r.nodes[static_cast<std::size_t>(n)].eta2;
    EXPECT_GE(marked_sum, theta * total * (1 - 1e-12));
  }
}

TEST(Residual, DenseOracleAndExactSolution)
{
  const Case s;
  const Vector load = s.ops.unit_mass * s.f_nodal;
  const int node = s.g.coarse_node_index(2, 1);
  const NodeBox omega = s.g.omega(node);
  EXPECT_LE(local_residual_norm(s.g, s.f, omega, s.u, load), 1e-8 * energy_norm(s.ops.stiffness, s.u));

  const Vector v = interpolate(s.g, plane);
  const Matrix a = oracle::dense_operator(s.g, s.f, omega, true);
  Vector r(a.rows());
  Vector vl(a.rows());
  for (int j = omega.j0; j <= omega.j1; ++j)
    for (int i = omega.i0; i <= omega.i1; ++i) {
      vl[omega.local(i, j)] = v[s.g.node_index(i, j)];
      r[omega.local(i, j)] = load[s.g.node_index(i, j)];
    }
  r -= a * vl;
  std::vector<Eigen::Index> inner;
  for (int j = omega.j0 + 1; j < omega.j1; ++j)
    for (int i = omega.i0 + 1; i < omega.i1; ++i) inner.push_back(omega.local(i, j));
  const auto n = static_cast<Eigen::Index>(inner.size());
  Matrix ai(n, n);
  Vector ri(n);
  for (Eigen::Index p = 0; p < n; ++p) {
    ri[p] = r[inner[static_cast<std::size_t>(p)]];
    for (Eigen::Index q = 0; q < n; ++q) ai(p, q) = a(inner[static_cast<std::size_t>(p)], inner[static_cast<std::size_t>(q)]);
  }
  const double expect = std::sqrt(ri.dot(ai.fullPivLu().solve(ri)));
  EXPECT_NEAR(local_residual_norm(s.g, s.f, omega, v, load), expect, 1e-9 * expect);
}

TEST(Indicators, EtaIsResidualSquaredOverLambda)
{
  const Case s;
  const auto bases = reduce_all(s.g, s.f, s.f, {.mode = SnapshotMode::random, .oversampling = 2, .k_nb = 2, .p_bf = 2});
  const Vector load = s.ops.unit_mass * s.f_nodal;
  const Vector v = interpolate(s.g, plane);
  const auto ind = residual_indicators(s.g, s.f, v, load, bases, 2);
  ASSERT_EQ(ind.nodes.size(), 9u);
  double sum = 0.0;
  for (const auto& n : ind.nodes) {
    EXPECT_TRUE(s.g.is_interior_coarse_node(n.node));
    EXPECT_EQ(n.lambda, *bases[static_cast<std::size_t>(n.node)].excluded_eigenvalue);
    EXPECT_DOUBLE_EQ(n.eta2, n.residual_norm * n.residual_norm / n.lambda);
    sum += n.eta2;
  }
  EXPECT_DOUBLE_EQ(ind.sum_eta2(), sum);
}

TEST(Enrich, AppendsMassOrthogonalModes)
{
  const Case s;
  const int node = s.g.coarse_node_index(2, 2);
  const auto nb = neighborhood(s.g, node, 2);
  const auto ops = local_operators(s.g, s.f, s.f, nb.omega);
  const auto base = offline_reduce(random_snapshots(s.g, s.f, nb, 3, 2, 1), ops, 4);
  const auto e = enrich(s.g, s.f, s.f, nb, s.pou.chi[static_cast<std::size_t>(node)], base, 2, 1, 1, 5);
  EXPECT_EQ(e.appended, 2);
  EXPECT_EQ(e.local_solves, 3);
  ASSERT_EQ(e.basis.size(), 6);
  EXPECT_EQ(e.basis.modes.topRows(4), base.modes);
  const Matrix gram = e.basis.modes * ops.mass * e.basis.modes.transpose();
  EXPECT_LE((gram - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-8);
  ASSERT_TRUE(e.basis.excluded_eigenvalue.has_value());
  EXPECT_GE(*e.basis.excluded_eigenvalue, e.basis.eigenvalues[5]);
  EXPECT_THROW(enrich(s.g, s.f, s.f, nb, s.pou.chi[0], base, 2, 1, 1, 5), ConfigError);
  EXPECT_THROW(enrich(s.g, s.f, s.f, nb, s.pou.chi[static_cast<std::size_t>(node)], base, 0, 1, 1, 5), ConfigError);
}

TEST(Enrich, SaturatedSpaceThrows)
{
  const auto g = build_geometry(3, 3, 2);
  const auto f = oracle::random_field(g, 3, 1.0, 10.0);
  const int node = g.coarse_node_index(1, 1);
  const auto nb = neighborhood(g, node, 0);
  const auto ops = local_operators(g, f, f, nb.omega);
  const auto full = full_snapshots(g, f, nb);
  const auto sp = snapshot_spectrum(full.rows, ops.stiffness, ops.mass, snapshot_rank_tolerance);
  const auto everything = offline_reduce(full, ops, static_cast<int>(sp.values.size()));
  const auto chi = build_standard_pou(g).chi[static_cast<std::size_t>(node)];
  EXPECT_THROW(enrich(g, f, f, nb, chi, everything, 2, 1, 1, 1), NumericalError);
}

TEST(AdaptiveLoop, MonotoneErrorAndStops)
{
  const Case s;
  const ReductionConfig init{.mode = SnapshotMode::random, .oversampling = 2, .k_nb = 1, .p_bf = 1, .seed = 3};
  const auto rows = adaptive_loop(s.problem(), init, {.theta = 0.5, .c_nb = 1, .c_bf = 1, .max_iter = 6});
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_EQ(rows[0].dim, offline_dimension(s.g, 1));
  for (std::size_t k = 1; k < rows.size(); ++k) {
    EXPECT_EQ(rows[k].dim, rows[k - 1].dim + rows[k - 1].marked_count);
    EXPECT_LE(rows[k].h1_err, rows[k - 1].h1_err * (1 + 1e-9));
    EXPECT_EQ(rows[k].iter, static_cast<int>(k));
  }
  EXPECT_EQ(rows.back().marked_count, 0u);

  // initial dim 25 + 9 = 34
  const auto capped = adaptive_loop(s.problem(), init, {.theta = 0.5, .c_nb = 1, .max_iter = 50, .max_dim = 40});
  ASSERT_GE(capped.size(), 2u);
  EXPECT_GE(capped.back().dim, 40u);
  EXPECT_LT(capped[capped.size() - 2].dim, 40u);
  const auto target = adaptive_loop(s.problem(), init, {.max_iter = 50, .target_err = 1e6});
  EXPECT_EQ(target.size(), 1u);
  EXPECT_THROW(adaptive_loop(s.problem(), {.mode = SnapshotMode::full}, {}), ConfigError);
}

TEST(AdaptiveLoop, ThreadCountDoesNotChangeResult)
{
  const Case s;
  ReductionConfig init{.mode = SnapshotMode::random, .oversampling = 1, .k_nb = 1, .p_bf = 2, .seed = 8};
  const AdaptiveConfig cfg{.theta = 0.4, .c_nb = 2, .c_bf = 1, .max_iter = 3};
  const auto a = adaptive_loop(s.problem(), init, cfg);
  init.threads = 4;
  const auto b = adaptive_loop(s.problem(), init, cfg);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].dim, b[k].dim);
    EXPECT_EQ(a[k].h1_err, b[k].h1_err);
    EXPECT_EQ(a[k].sum_eta2, b[k].sum_eta2);
  }
}
