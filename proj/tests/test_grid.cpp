#include <dcgms/grid.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace dcgms;

TEST(Grid, CountsFollowCellsPerSide)
{
  for (auto [nc, nf] : {std::pair{2, 1}, {2, 2}, {3, 4}, {5, 3}}) {
    const Grid g(nc, nf);
    const int n = nc * nf;
    EXPECT_EQ(g.cells_per_side(), n);
    EXPECT_EQ(g.num_nodes(), (n + 1) * (n + 1));
    EXPECT_EQ(g.num_triangles(), 2 * n * n);
    EXPECT_EQ(g.num_interior_vertices(), (nc - 1) * (nc - 1));
    EXPECT_EQ(g.num_free(), (n - 1) * (n - 1));
  }
}

TEST(Grid, SmallestGridByHand)
{
  const Grid g(2, 2);
  EXPECT_EQ(g.num_nodes(), 25);
  EXPECT_EQ(g.num_triangles(), 32);
  EXPECT_EQ(g.num_interior_vertices(), 1);
  EXPECT_EQ(neighborhood(g, 0).boundary.size(), 16u);
}

TEST(Grid, ReferenceResolution)
{
  const Grid g(16, 8);
  EXPECT_EQ(g.num_interior_vertices(), 225);
  EXPECT_EQ(g.cells_per_side(), 128);
  EXPECT_EQ(g.dof_fine_reported(), 32768);
  EXPECT_EQ(g.dof_fine_raw(), 2L * 129 * 129);
  EXPECT_EQ(g.dof_fine_constrained(), 2L * 127 * 127);
}

TEST(Grid, RejectsDegenerateSizes)
{
  try {
    Grid(1, 4);
    FAIL() << "expected DomainError";
  }
  catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("no interior coarse vertices"), std::string::npos);
  }
  EXPECT_THROW(Grid(4, 0), DomainError);
}

TEST(Grid, TrianglesArePositivelyOrientedAndTileTheSquare)
{
  const Grid g(3, 2);
  double total = 0.0;
  for (int t = 0; t < g.num_triangles(); ++t) {
    const double a = g.triangle_area(t);
    EXPECT_NEAR(a, 0.5 * g.h() * g.h(), 1e-15);
    total += a;
  }
  EXPECT_NEAR(total, 1.0, 1e-13);
}

TEST(Grid, BothTrianglesOfACellShareTheCell)
{
  const Grid g(2, 3);
  for (int c = 0; c < g.num_cells(); ++c) {
    EXPECT_EQ(Grid::cell_of(2 * c), c);
    EXPECT_EQ(Grid::cell_of(2 * c + 1), c);
    const auto ctr = g.cell_center(c);
    for (int t : {2 * c, 2 * c + 1})
      for (int v : g.triangle(t)) {
        EXPECT_LE(std::abs(g.coord(v)[0] - ctr[0]), 0.5 * g.h() + 1e-15);
        EXPECT_LE(std::abs(g.coord(v)[1] - ctr[1]), 0.5 * g.h() + 1e-15);
      }
  }
}

TEST(Grid, DirichletNodesAreExactlyTheBoundary)
{
  const Grid g(3, 3);
  const int n = g.cells_per_side();
  EXPECT_EQ(static_cast<int>(g.dirichlet_nodes().size()), 4 * n);
  for (int id = 0; id < g.num_nodes(); ++id) {
    const auto p = g.coord(id);
    const bool on_boundary = p[0] == 0.0 || p[1] == 0.0 || std::abs(p[0] - 1.0) < 1e-14 || std::abs(p[1] - 1.0) < 1e-14;
    EXPECT_EQ(g.is_dirichlet(id), on_boundary);
    if (!on_boundary) {
      EXPECT_EQ(g.free_nodes()[g.free_index(id)], id);
    }
  }
}

TEST(Grid, NeighborhoodIsFourCoarseBlocks)
{
  const Grid g(4, 3);
  for (int j = 0; j < g.num_interior_vertices(); ++j) {
    const Patch p = neighborhood(g, j);
    const auto [I, J] = g.interior_vertex(j);
    EXPECT_EQ(g.interior_vertex_index(I, J), j);
    EXPECT_EQ(p.width, 2 * g.nf());
    EXPECT_EQ(p.height, 2 * g.nf());
    EXPECT_EQ(p.elements.size(), 2u * 4 * g.nf() * g.nf());
    EXPECT_EQ(static_cast<int>(p.boundary.size()), 8 * g.nf());
    EXPECT_EQ(p.interior.size() + p.boundary.size(), p.nodes.size());

    // boundary and interior are disjoint
    std::set<int> b(p.boundary.begin(), p.boundary.end());
    for (int i : p.interior) EXPECT_FALSE(b.count(i));

    // every element lies inside the patch
    for (int t : p.elements)
      for (int v : g.triangle(t)) EXPECT_GE(p.local_index(v, g.nodes_per_side()), 0);
  }
}

TEST(Grid, NeighborhoodOfCenterVertexCoversDomain)
{
  const Grid g(2, 2);
  const Patch p = neighborhood(g, 0);
  EXPECT_EQ(p.num_nodes(), g.num_nodes());
  std::set<int> outer;
  for (int b : p.boundary) outer.insert(p.nodes[b]);
  std::set<int> dir(g.dirichlet_nodes().begin(), g.dirichlet_nodes().end());
  EXPECT_EQ(outer, dir);
}

TEST(Grid, SingleCellNeighborhood)
{
  const Grid g(3, 1);
  for (int j = 0; j < g.num_interior_vertices(); ++j) {
    const Patch p = neighborhood(g, j);
    EXPECT_EQ(p.elements.size(), 8u);
    EXPECT_EQ(p.interior.size(), 1u);
    EXPECT_EQ(p.boundary.size(), 8u);
    EXPECT_EQ(p.nodes[p.interior[0]], g.node(g.interior_vertex(j)[0], g.interior_vertex(j)[1]));
  }
}

TEST(Grid, BoundaryOrderIsCounterclockwiseFromBottomLeft)
{
  const Grid g(2, 2);
  const Patch p = neighborhood(g, 0);
  EXPECT_EQ(p.boundary.front(), 0);
  // consecutive boundary nodes are fine-grid neighbors and wind counterclockwise
  double area2 = 0.0;
  for (std::size_t k = 0; k < p.boundary.size(); ++k) {
    const auto a = g.coord(p.nodes[p.boundary[k]]);
    const auto b = g.coord(p.nodes[p.boundary[(k + 1) % p.boundary.size()]]);
    EXPECT_NEAR(std::hypot(b[0] - a[0], b[1] - a[1]), g.h(), 1e-14);
    area2 += a[0] * b[1] - b[0] * a[1];
  }
  EXPECT_GT(area2, 0.0);
}

TEST(Grid, BoundaryVertexPatchIsClipped)
{
  const Grid g(3, 2);
  const Patch corner = g.vertex_patch(0, 0);
  EXPECT_EQ(corner.width, 2);
  EXPECT_EQ(corner.height, 2);
  const Patch edge = g.vertex_patch(3, 1);
  EXPECT_EQ(edge.width, 2);
  EXPECT_EQ(edge.height, 4);
  EXPECT_THROW(g.vertex_patch(4, 0), DomainError);
}

TEST(Grid, NeighborhoodRejectsNonInteriorIndex)
{
  const Grid g(3, 2);
  EXPECT_THROW(neighborhood(g, -1), DomainError);
  EXPECT_THROW(neighborhood(g, g.num_interior_vertices()), DomainError);
}

TEST(Grid, LocalIndexOutsidePatch)
{
  const Grid g(4, 2);
  const Patch p = neighborhood(g, 0);
  EXPECT_EQ(p.local_index(g.node(g.cells_per_side(), g.cells_per_side()), g.nodes_per_side()), -1);
  for (int l = 0; l < p.num_nodes(); ++l) EXPECT_EQ(p.local_index(p.nodes[l], g.nodes_per_side()), l);
}
