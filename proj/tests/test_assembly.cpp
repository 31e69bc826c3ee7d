#include "oracles.hpp"

#include <gmsfem/assembly.hpp>

#include <gtest/gtest.h>

using namespace gmsfem;

TEST(Element, UnitSquareStiffness)
{
  const auto k = element_stiffness(1.0, 1.0);
  for (int a = 0; a < 4; ++a) EXPECT_NEAR(k(a, a), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(k(0, 2), -1.0 / 3.0, 1e-15);
  EXPECT_NEAR(k(1, 3), -1.0 / 3.0, 1e-15);
  EXPECT_NEAR(k(0, 1), -1.0 / 6.0, 1e-15);
  EXPECT_LE((k - oracle::quad_stiffness(1.0, 1.0)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE((element_stiffness(0.3, 0.7) - oracle::quad_stiffness(0.3, 0.7)).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LE((element_mass(0.3, 0.7) - oracle::quad_mass(0.3, 0.7)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Assembly, SingleElementMassTotalsArea)
{
  const auto g = build_geometry(1, 1, 1);
  const auto m = assemble_mass(g, CoefficientField::uniform(g, 1.0), g.domain()).matrix;
  EXPECT_NEAR(Matrix(m).sum(), 1.0, 1e-15);
}

TEST(Assembly, MatchesDenseOracle)
{
  const auto g = build_geometry(3, 2, 3);
  const auto f = oracle::random_field(g, 5);
  const NodeBox region{2, 1, 8, 6};
  const Matrix a = Matrix(assemble_stiffness(g, f, region).matrix);
  const Matrix m = Matrix(assemble_mass(g, f, region).matrix);
  EXPECT_LE((a - oracle::dense_operator(g, f, region, true)).cwiseAbs().maxCoeff(), 1e-12 * a.cwiseAbs().maxCoeff());
  EXPECT_LE((m - oracle::dense_operator(g, f, region, false)).cwiseAbs().maxCoeff(), 1e-12 * m.cwiseAbs().maxCoeff());
}

TEST(AssemblyProperty, SymmetryNullspaceLinearity)
{
  const auto g = build_geometry(4, 4, 3);
  for (unsigned seed = 1; seed <= 5; ++seed) {
    const auto f = oracle::random_field(g, seed, 1.0, 1e4);
    const auto a = assemble_stiffness(g, f, g.domain()).matrix;
    const Matrix ad = Matrix(a);
    EXPECT_EQ((ad - ad.transpose()).cwiseAbs().maxCoeff(), 0.0);
    const Vector ones = Vector::Ones(a.rows());
    EXPECT_LE((a * ones).cwiseAbs().maxCoeff(), 1e-10 * ad.cwiseAbs().maxCoeff());
    // positive semi-definite with one-dimensional kernel
    Eigen::SelfAdjointEigenSolver<Matrix> es(ad);
    EXPECT_GE(es.eigenvalues()[0], -1e-10 * es.eigenvalues().maxCoeff());
    EXPECT_GT(es.eigenvalues()[1], 1e-8);
    const Matrix scaled = Matrix(assemble_stiffness(g, f.scaled(10.0), g.domain()).matrix);
    EXPECT_LE((scaled - 10.0 * ad).cwiseAbs().maxCoeff(), 1e-12 * scaled.cwiseAbs().maxCoeff());
    const Matrix md = Matrix(assemble_mass(g, f, g.domain()).matrix);
    const Matrix m2 = Matrix(assemble_mass(g, f.scaled(2.0), g.domain()).matrix);
    EXPECT_LE((m2 - 2.0 * md).cwiseAbs().maxCoeff(), 1e-15 * m2.cwiseAbs().maxCoeff());
    // 1ᵀ M 1 = ∫ κ̃
    double integral = 0.0;
    for (double v : f.values()) integral += v * g.hx() * g.hy();
    EXPECT_NEAR(ones.dot(assemble_mass(g, f, g.domain()).matrix * ones), integral, 1e-11 * integral);
  }
}

TEST(Assembly, RejectsBadRegion)
{
  const auto g = build_geometry(2, 2, 2);
  const auto f = CoefficientField::uniform(g, 1.0);
  EXPECT_THROW(assemble_stiffness(g, f, NodeBox{0, 0, 5, 4}), ConfigError);
  EXPECT_THROW(assemble_stiffness(g, f, NodeBox{1, 1, 1, 3}), ConfigError);
  EXPECT_THROW(assemble_stiffness(g, CoefficientField::uniform(build_geometry(1, 1, 1), 1.0), g.domain()), ConfigError);
}

TEST(Dirichlet, LinearDataReproduced)
{
  const auto g = build_geometry(10, 10, 10);
  const auto f = CoefficientField::uniform(g, 1.0);
  const Vector u = fine_reference_solve(
    g, f, [](double, double) { return 0.0; }, [](double x, double y) { return x + y; });
  double worst = 0.0;
  for (int j = 0; j < g.nodes_y(); ++j)
    for (int i = 0; i < g.nodes_x(); ++i) worst = std::max(worst, std::abs(u[g.node_index(i, j)] - g.x(i) - g.y(j)));
  EXPECT_LE(worst, 1e-9);
}

TEST(Dirichlet, ConstantDataGivesConstant)
{
  const auto g = build_geometry(4, 4, 4);
  const auto f = oracle::random_field(g, 9, 1.0, 1e4);
  const Vector u = fine_reference_solve(
    g, f, [](double, double) { return 0.0; }, [](double, double) { return 2.5; });
  EXPECT_LE((u.array() - 2.5).abs().maxCoeff(), 1e-9);
}

TEST(Dirichlet, MatchesDenseOracle)
{
  for (auto [cx, n] : {std::pair{1, 2}, std::pair{2, 2}, std::pair{2, 4}}) {
    const auto g = build_geometry(cx, cx, n);
    const auto f = oracle::random_field(g, 3, 1.0, 1e3);
    const auto op = assemble_stiffness(g, f, g.domain());
    const Matrix dense = oracle::dense_operator(g, f, g.domain(), true);
    Vector rhs(op.matrix.rows());
    for (Eigen::Index k = 0; k < rhs.size(); ++k) rhs[k] = std::sin(1.0 + k);
    const auto bnd = oracle::perimeter(g.domain());
    std::vector<double> vals;
    for (int b : bnd) vals.push_back(std::cos(0.3 * b));
    const Vector x = solve_dirichlet(op, rhs, bnd, vals);
    const Vector ref = oracle::dense_dirichlet(dense, rhs, bnd, vals);
    EXPECT_LE((x - ref).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, ref.cwiseAbs().maxCoeff()));
  }
}

TEST(Dirichlet, ResidualAndErrors)
{
  const auto g = build_geometry(3, 3, 3);
  const auto f = oracle::random_field(g, 4, 1.0, 1e4);
  const auto op = assemble_stiffness(g, f, g.domain());
  const auto bnd = global_boundary_nodes(g);
  const DirichletSolver s(op.matrix, bnd);
  Vector rhs = Vector::Ones(op.matrix.rows());
  const Vector x = s.solve(rhs, Vector::Zero(static_cast<Eigen::Index>(bnd.size())));
  const Vector r = op.matrix * x - rhs;
  double worst = 0.0;
  for (int k : s.free_nodes()) worst = std::max(worst, std::abs(r[k]));
  EXPECT_LE(worst, 1e-10 * rhs.norm());
  EXPECT_THROW(DirichletSolver(op.matrix, std::vector<int>{}), ConfigError);
  EXPECT_THROW(DirichletSolver(op.matrix, std::vector<int>{-1}), ConfigError);
  EXPECT_THROW(s.solve(Vector::Ones(3), Vector::Zero(static_cast<Eigen::Index>(bnd.size()))), ConfigError);
}

TEST(Norms, EnergyNorm)
{
  const auto g = build_geometry(2, 2, 2);
  const auto ops = assemble_global(g, CoefficientField::uniform(g, 3.0));
  const Vector ones = Vector::Ones(static_cast<Eigen::Index>(g.node_count()));
  EXPECT_NEAR(energy_norm(ops.kappa_mass, ones), std::sqrt(3.0), 1e-14);
  EXPECT_NEAR(energy_norm(ops.stiffness, ones), 0.0, 1e-7);
  // ∫ 3 |∇(x)|² = 3
  EXPECT_NEAR(energy_norm(ops.stiffness, interpolate(g, [](double x, double) { return x; })), std::sqrt(3.0), 1e-12);
}
