#pragma once

/** @file grid.hpp
    @brief Structured fine triangulation of the unit square with an embedded coarse grid.

    The fine grid has n = nc*nf cells per side. Nodes are numbered row-major from the
    bottom-left corner, node(ix, iy) = iy*(n+1) + ix. Each cell (cx, cy) is split along
    the diagonal from its lower-left to its upper-right corner into

      lower triangle 2*cell     : (ix,iy), (ix+1,iy),   (ix+1,iy+1)
      upper triangle 2*cell + 1 : (ix,iy), (ix+1,iy+1), (ix,iy+1)

    with cell = cy*n + cx. Coarse vertices are (I, J) with 0 <= I, J <= nc; the interior
    ones are numbered j = (J-1)*(nc-1) + (I-1).
*/

#include "errors.hpp"

#include <algorithm>
#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace dcgms {

using Point = std::array<double, 2>;
using Triangle = std::array<int, 3>;

/**
 * @brief Fine nodes and elements covering a union of coarse blocks around one coarse vertex.
 *
 * For an interior vertex this is the coarse neighborhood omega_j (2x2 coarse blocks).
 * For a vertex on the domain boundary the patch is clipped to the domain. Local node
 * numbering is row-major inside the patch's bounding box.
 */
struct Patch {
  int vertex_i = 0, vertex_j = 0; ///< coarse vertex (I, J)
  int x0 = 0, y0 = 0;             ///< lower-left fine node of the patch
  int width = 0, height = 0;      ///< patch size in fine cells

  std::vector<int> elements; ///< global triangle ids, ascending
  std::vector<int> nodes;    ///< global node ids, local order
  std::vector<int> interior; ///< local indices of nodes strictly inside the patch
  std::vector<int> boundary; ///< local indices of nodes on the patch boundary, counterclockwise

  int num_nodes() const { return static_cast<int>(nodes.size()); }

  /// Local index of a global node, or -1 if the node lies outside the patch.
  int local_index(int global_node, int nodes_per_side) const
  {
    const int ix = global_node % nodes_per_side - x0;
    const int iy = global_node / nodes_per_side - y0;
    if (ix < 0 || iy < 0 || ix > width || iy > height) return -1;
    return iy * (width + 1) + ix;
  }
};

class Grid {
public:
  Grid(int nc, int nf) : nc_(nc), nf_(nf)
  {
    if (nf < 1) throw DomainError("build_grid: nf must be >= 1");
    if (nc < 2) throw DomainError("build_grid: no interior coarse vertices (nc = " + std::to_string(nc) + ")");

    const int n = cells_per_side();
    const int np = n + 1;
    coords_.resize(static_cast<std::size_t>(np) * np);
    for (int iy = 0; iy < np; ++iy)
      for (int ix = 0; ix < np; ++ix) coords_[iy * np + ix] = {ix * h(), iy * h()};

    triangles_.reserve(2 * static_cast<std::size_t>(n) * n);
    for (int cy = 0; cy < n; ++cy)
      for (int cx = 0; cx < n; ++cx) {
        const int n0 = node(cx, cy), n1 = node(cx + 1, cy), n2 = node(cx + 1, cy + 1), n3 = node(cx, cy + 1);
        triangles_.push_back({n0, n1, n2});
        triangles_.push_back({n0, n2, n3});
      }

    free_index_.assign(coords_.size(), -1);
    for (int iy = 0; iy < np; ++iy)
      for (int ix = 0; ix < np; ++ix) {
        const int id = node(ix, iy);
        if (ix == 0 || iy == 0 || ix == n || iy == n) {
          dirichlet_.push_back(id);
        }
        else {
          free_index_[id] = static_cast<int>(free_nodes_.size());
          free_nodes_.push_back(id);
        }
      }
  }

  int nc() const { return nc_; }
  int nf() const { return nf_; }
  int cells_per_side() const { return nc_ * nf_; }
  int nodes_per_side() const { return cells_per_side() + 1; }
  double h() const { return 1.0 / cells_per_side(); }
  double coarse_h() const { return 1.0 / nc_; }

  int num_nodes() const { return static_cast<int>(coords_.size()); }
  int num_cells() const { return cells_per_side() * cells_per_side(); }
  int num_triangles() const { return static_cast<int>(triangles_.size()); }
  int num_free() const { return static_cast<int>(free_nodes_.size()); }
  int num_interior_vertices() const { return (nc_ - 1) * (nc_ - 1); }

  int node(int ix, int iy) const { return iy * nodes_per_side() + ix; }
  const Point& coord(int node_id) const { return coords_[node_id]; }
  const Triangle& triangle(int t) const { return triangles_[t]; }
  static int cell_of(int t) { return t / 2; }

  Point cell_center(int cell) const
  {
    const int n = cells_per_side();
    return {(cell % n + 0.5) * h(), (cell / n + 0.5) * h()};
  }

  double triangle_area(int t) const
  {
    const auto& tri = triangles_[t];
    const auto& a = coords_[tri[0]];
    const auto& b = coords_[tri[1]];
    const auto& c = coords_[tri[2]];
    return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]));
  }

  bool is_dirichlet(int node_id) const { return free_index_[node_id] < 0; }
  /// Position of a node among the free (non-Dirichlet) nodes, or -1.
  int free_index(int node_id) const { return free_index_[node_id]; }
  const std::vector<int>& free_nodes() const { return free_nodes_; }
  const std::vector<int>& dirichlet_nodes() const { return dirichlet_; }

  /// Fine-scale degrees of freedom counted as 2 * (cells per side)^2, the count used in reported results.
  long dof_fine_reported() const { return 2L * cells_per_side() * cells_per_side(); }
  long dof_fine_raw() const { return 2L * num_nodes(); }
  long dof_fine_constrained() const { return 2L * num_free(); }

  bool is_interior_vertex(int I, int J) const { return I > 0 && J > 0 && I < nc_ && J < nc_; }
  int interior_vertex_index(int I, int J) const { return (J - 1) * (nc_ - 1) + (I - 1); }
  std::array<int, 2> interior_vertex(int j) const { return {j % (nc_ - 1) + 1, j / (nc_ - 1) + 1}; }
  Point vertex_coord(int I, int J) const { return {I * coarse_h(), J * coarse_h()}; }

  /// Union of the coarse blocks sharing vertex (I, J), clipped to the domain.
  Patch vertex_patch(int I, int J) const
  {
    if (I < 0 || J < 0 || I > nc_ || J > nc_) throw DomainError("vertex_patch: coarse vertex out of range");
    const int bx0 = std::max(I - 1, 0), bx1 = std::min(I + 1, nc_);
    const int by0 = std::max(J - 1, 0), by1 = std::min(J + 1, nc_);
    return make_patch(I, J, bx0 * nf_, by0 * nf_, (bx1 - bx0) * nf_, (by1 - by0) * nf_);
  }

  /// Fine nodes/elements of one coarse block K = [bx, bx+1] x [by, by+1] (in coarse units).
  Patch block_patch(int bx, int by) const
  {
    if (bx < 0 || by < 0 || bx >= nc_ || by >= nc_) throw DomainError("block_patch: coarse block out of range");
    return make_patch(-1, -1, bx * nf_, by * nf_, nf_, nf_);
  }

private:
  Patch make_patch(int I, int J, int x0, int y0, int w, int hgt) const
  {
    Patch p;
    p.vertex_i = I;
    p.vertex_j = J;
    p.x0 = x0;
    p.y0 = y0;
    p.width = w;
    p.height = hgt;

    const int n = cells_per_side();
    for (int cy = y0; cy < y0 + hgt; ++cy)
      for (int cx = x0; cx < x0 + w; ++cx) {
        p.elements.push_back(2 * (cy * n + cx));
        p.elements.push_back(2 * (cy * n + cx) + 1);
      }

    p.nodes.reserve(static_cast<std::size_t>(w + 1) * (hgt + 1));
    for (int iy = 0; iy <= hgt; ++iy)
      for (int ix = 0; ix <= w; ++ix) {
        p.nodes.push_back(node(x0 + ix, y0 + iy));
        if (ix > 0 && iy > 0 && ix < w && iy < hgt) p.interior.push_back(iy * (w + 1) + ix);
      }

    // counterclockwise from the lowest-numbered (bottom-left) node
    auto loc = [w](int ix, int iy) { return iy * (w + 1) + ix; };
    for (int ix = 0; ix < w; ++ix) p.boundary.push_back(loc(ix, 0));
    for (int iy = 0; iy < hgt; ++iy) p.boundary.push_back(loc(w, iy));
    for (int ix = w; ix > 0; --ix) p.boundary.push_back(loc(ix, hgt));
    for (int iy = hgt; iy > 0; --iy) p.boundary.push_back(loc(0, iy));
    return p;
  }

  int nc_, nf_;
  std::vector<Point> coords_;
  std::vector<Triangle> triangles_;
  std::vector<int> free_index_;
  std::vector<int> free_nodes_;
  std::vector<int> dirichlet_;
};

inline Grid build_grid(int nc, int nf) { return Grid(nc, nf); }

/// Coarse neighborhood omega_j of interior coarse vertex j.
inline Patch neighborhood(const Grid& g, int j)
{
  if (j < 0 || j >= g.num_interior_vertices())
    throw DomainError("neighborhood: index " + std::to_string(j) + " is not an interior coarse vertex");
  const auto [I, J] = g.interior_vertex(j);
  return g.vertex_patch(I, J);
}

} // namespace dcgms
