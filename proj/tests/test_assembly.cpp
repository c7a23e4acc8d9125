#include "form_agreement.hpp"
#include "quadrature_oracle.hpp"

#include <dcgms/assembly.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

using namespace dcgms;

TEST(Element, ReferenceTriangleMatrices)
{
  const auto geo = element_geometry({0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0});
  EXPECT_DOUBLE_EQ(geo.area, 0.5);
  const auto K = element_stiffness(geo, 1.0);
  ElementMatrix expected;
  expected << 1.0, -0.5, -0.5, -0.5, 0.5, 0.0, -0.5, 0.0, 0.5;
  EXPECT_LT((K - expected).cwiseAbs().maxCoeff(), 1e-15);

  const auto M = element_mass(geo, 1.0);
  EXPECT_NEAR(M.sum(), 0.5, 1e-15);
  EXPECT_NEAR(M(0, 0), 1.0 / 12.0, 1e-15);
  EXPECT_NEAR(M(0, 1), 1.0 / 24.0, 1e-15);
}

TEST(Element, ConvectionOfConstantFieldAnnihilatesConstants)
{
  const auto geo = element_geometry({0.1, 0.2}, {0.4, 0.25}, {0.2, 0.6});
  const auto N = element_convection(geo, {3.0, -2.0});
  EXPECT_LT((N * Eigen::Vector3d::Ones()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Assembly, StiffnessRowsSumToZeroAndSymmetric)
{
  const Grid g(3, 3);
  std::mt19937_64 rng(7);
  const auto f = oracle::random_fields(g.cells_per_side(), rng);
  const SparseMatrix A = assemble_stiffness(g, f.kappa1);
  EXPECT_TRUE(is_symmetric(A));
  EXPECT_LT((A * Vector::Ones(A.rows())).cwiseAbs().maxCoeff(), 1e-12 * max_abs(A));
}

TEST(Assembly, MassIntegratesOne)
{
  const Grid g(2, 4);
  const SparseMatrix M = assemble_weighted_mass(g, CellField(g.num_cells(), 1.0));
  EXPECT_NEAR(Vector::Ones(M.rows()).dot(M * Vector::Ones(M.rows())), 1.0, 1e-13);
}

TEST(Assembly, StiffnessEnergyOfLinearFunction)
{
  // a(x, x) = int |grad x|^2 = 1 on the unit square for kappa = 1
  const Grid g(2, 3);
  Vector x(g.num_nodes());
  for (int i = 0; i < g.num_nodes(); ++i) x[i] = g.coord(i)[0];
  const SparseMatrix A = assemble_stiffness(g, CellField(g.num_cells(), 1.0));
  EXPECT_NEAR(x.dot(A * x), 1.0, 1e-13);
}

TEST(Assembly, NonPositivePermeabilityIsRejected)
{
  const Grid g(2, 1);
  CellField k(g.num_cells(), 1.0);
  k[1] = 0.0;
  EXPECT_THROW(assemble_stiffness(g, k), DomainError);
  EXPECT_THROW(assemble_stiffness(g, CellField(3, 1.0)), DomainError);
}

TEST(Assembly, MatchesQuadratureOracleOnRandomDraws)
{
  std::mt19937_64 rng(20240611);
  for (auto [nc, nf] : {std::pair{2, 1}, {2, 2}, {4, 2}, {2, 4}}) {
    const Grid g(nc, nf);
    for (int draw = 0; draw < 5; ++draw) {
      const auto d = oracle::compare_forms(g, oracle::random_fields(g.cells_per_side(), rng));
      EXPECT_LT(d.a, 1e-12);
      EXPECT_LT(d.c, 1e-12);
      EXPECT_LT(d.beta, 1e-12);
      EXPECT_LT(d.q, 1e-12);
      EXPECT_LT(d.s, 1e-12);
      EXPECT_LT(d.aqs, 1e-12);
      EXPECT_LT(d.block, 1e-12);
    }
  }
}

TEST(Assembly, ConvectionSkewPartForDivergenceFreeField)
{
  // for constant b, int (b.grad u) v + int (b.grad v) u = 0 when u, v vanish on the boundary
  const Grid g(3, 3);
  const auto N = restrict_to_free(g, assemble_convection(g, CellVectorField(g.num_cells(), Vec2{1.5, -0.7})));
  const SparseMatrix sym = SparseMatrix(N + SparseMatrix(N.transpose()));
  EXPECT_LT(max_abs(sym), 1e-13);
}

TEST(Assembly, BlockSystemShapeAndSymmetry)
{
  const Grid g(2, 3);
  auto f = FieldSet::constant(g.cells_per_side(), 2.0, 3.0);
  const auto sys = assemble_block_system(g, f);
  EXPECT_EQ(sys.size(), 2 * g.num_free());
  EXPECT_EQ(sys.B.rows(), sys.size());
  EXPECT_TRUE(is_symmetric(sys.A));
  EXPECT_TRUE(is_symmetric(sys.AQs));
  EXPECT_TRUE(is_symmetric(sys.C));
  // b = 0 and Q1 = Q2 makes the operator symmetric and equal to a_Qs
  EXPECT_TRUE(is_symmetric(sys.B));
  EXPECT_LT(max_abs(SparseMatrix(sys.B - sys.AQs)), 1e-12 * max_abs(sys.B));
}

TEST(Assembly, EqualContinuaGiveEqualSolutions)
{
  // kappa1 = kappa2, b1 = b2, Q1 = Q2, f1 = f2: coupling terms vanish on u1 = u2
  const Grid g(2, 4);
  auto f = FieldSet::constant(g.cells_per_side(), 1.0, 5.0, {2.0, 1.0});
  const auto sys = assemble_block_system(g, f);
  const Vector F = block_load(g, 1.0, 1.0);
  Eigen::SparseLU<SparseMatrix> lu(sys.B);
  const Vector u = lu.solve(F);
  EXPECT_LT((u.head(sys.n_free) - u.tail(sys.n_free)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Assembly, LoadVectorIntegratesSource)
{
  const Grid g(2, 4);
  const Vector F = load_vector(g, CellField(g.num_cells(), 2.0));
  EXPECT_NEAR(F.sum(), 2.0, 1e-13);
  const Vector G = load_vector_fn(g, [](double x, double y) { return x + y; });
  EXPECT_NEAR(G.sum(), 1.0, 1e-13);
}

TEST(Assembly, LocalFormsMatchPatchAssembly)
{
  const Grid g(3, 2);
  std::mt19937_64 rng(3);
  const auto f = oracle::random_fields(g.cells_per_side(), rng);
  const Patch p = neighborhood(g, 2);
  const SparseMatrix A_loc = local_stiffness(g, p, f.kappa1);
  EXPECT_EQ(A_loc.rows(), p.num_nodes());
  EXPECT_LT((A_loc * Vector::Ones(p.num_nodes())).cwiseAbs().maxCoeff(), 1e-12 * max_abs(A_loc));

  // energy of a global function supported inside omega_j agrees with the global form
  const SparseMatrix A = assemble_stiffness(g, f.kappa1);
  Vector u = Vector::Zero(g.num_nodes());
  for (int i : p.interior) u[p.nodes[i]] = std::sin(1.0 + i);
  const Vector ul = restrict_local(u, p);
  EXPECT_NEAR(ul.dot(A_loc * ul), u.dot(A * u), 1e-12 * u.dot(A * u));
}

TEST(Assembly, SubmatrixExtractEmbedRoundTrip)
{
  const Grid g(2, 2);
  const SparseMatrix A = assemble_stiffness(g, CellField(g.num_cells(), 1.0));
  const std::vector<int> idx{1, 4, 7};
  const SparseMatrix S = extract_submatrix(A, idx);
  const SparseMatrix E = embed_submatrix(S, idx, static_cast<int>(A.rows()));
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      EXPECT_EQ(S.coeff(r, c), A.coeff(idx[r], idx[c]));
      EXPECT_EQ(E.coeff(idx[r], idx[c]), S.coeff(r, c));
    }
  EXPECT_EQ(E.nonZeros(), S.nonZeros());
}

TEST(Assembly, CooDumpFormat)
{
  const auto path = std::filesystem::temp_directory_path() / "dcgms_test_coo.txt";
  SparseMatrix A(2, 3);
  A.insert(0, 2) = 1.5;
  A.insert(1, 0) = -2.0;
  write_coo(path.string(), A);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "% 2 3 2");
  int r, c;
  double v;
  in >> r >> c >> v;
  EXPECT_EQ(r, 1);
  EXPECT_EQ(c, 0);
  EXPECT_EQ(v, -2.0);
}
