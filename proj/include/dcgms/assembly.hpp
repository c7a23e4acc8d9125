#pragma once

/** @file assembly.hpp
    @brief P1 assembly of the stiffness, mass, convection and block operators.

    All element integrals are evaluated in closed form; coefficients are constant on
    each triangle, so the results are exact up to rounding.
*/

#include "coeffs.hpp"
#include "errors.hpp"
#include "grid.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <fmt/format.h>

namespace dcgms {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;
using Triplets = std::vector<Eigen::Triplet<double>>;
using ElementField = std::vector<double>; ///< one value per triangle
using ElementMatrix = Eigen::Matrix3d;

struct ElementGeometry {
  std::array<Vec2, 3> grad; ///< gradients of the three barycentric basis functions
  double area = 0.0;
};

inline ElementGeometry element_geometry(const Point& p0, const Point& p1, const Point& p2)
{
  const double det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
  if (det == 0.0) throw DomainError("element_geometry: degenerate triangle");
  ElementGeometry geo;
  geo.area = 0.5 * std::abs(det);
  geo.grad[0] = {(p1[1] - p2[1]) / det, (p2[0] - p1[0]) / det};
  geo.grad[1] = {(p2[1] - p0[1]) / det, (p0[0] - p2[0]) / det};
  geo.grad[2] = {(p0[1] - p1[1]) / det, (p1[0] - p0[0]) / det};
  return geo;
}

inline ElementGeometry element_geometry(const Grid& g, int t)
{
  const auto& tri = g.triangle(t);
  return element_geometry(g.coord(tri[0]), g.coord(tri[1]), g.coord(tri[2]));
}

inline ElementMatrix element_stiffness(const ElementGeometry& geo, double kappa)
{
  ElementMatrix k;
  for (int m = 0; m < 3; ++m)
    for (int n = 0; n < 3; ++n)
      k(m, n) = kappa * geo.area * (geo.grad[m][0] * geo.grad[n][0] + geo.grad[m][1] * geo.grad[n][1]);
  return k;
}

inline ElementMatrix element_mass(const ElementGeometry& geo, double w)
{
  ElementMatrix m = ElementMatrix::Constant(1.0);
  m.diagonal().setConstant(2.0);
  return (w * geo.area / 12.0) * m;
}

/// Entry (m, n) = int (b . grad phi_n) phi_m: trial gradient, test value.
inline ElementMatrix element_convection(const ElementGeometry& geo, const Vec2& b)
{
  ElementMatrix c;
  for (int n = 0; n < 3; ++n) {
    const double bg = b[0] * geo.grad[n][0] + b[1] * geo.grad[n][1];
    for (int m = 0; m < 3; ++m) c(m, n) = bg * geo.area / 3.0;
  }
  return c;
}

/**
 * @brief Generic element loop.
 *
 * @param elements  triangles to visit
 * @param node_map  maps a global node id to a row/column index, or -1 to drop it
 * @param kernel    (triangle id, geometry) -> 3x3 element matrix
 */
template <class NodeMap, class Kernel>
SparseMatrix assemble_elements(const Grid& g, std::span<const int> elements, int dim, NodeMap&& node_map, Kernel&& kernel)
{
  Triplets trips;
  trips.reserve(elements.size() * 9);
  for (int t : elements) {
    const auto geo = element_geometry(g, t);
    const ElementMatrix ke = kernel(t, geo);
    const auto& tri = g.triangle(t);
    std::array<int, 3> idx{node_map(tri[0]), node_map(tri[1]), node_map(tri[2])};
    for (int m = 0; m < 3; ++m) {
      if (idx[m] < 0) continue;
      for (int n = 0; n < 3; ++n)
        if (idx[n] >= 0 && ke(m, n) != 0.0) trips.emplace_back(idx[m], idx[n], ke(m, n));
    }
  }
  SparseMatrix A(dim, dim);
  A.setFromTriplets(trips.begin(), trips.end());
  return A;
}

namespace detail {

inline std::vector<int> all_elements(const Grid& g)
{
  std::vector<int> e(g.num_triangles());
  for (int t = 0; t < g.num_triangles(); ++t) e[t] = t;
  return e;
}

template <class Kernel>
SparseMatrix assemble_global(const Grid& g, Kernel&& kernel)
{
  const auto elems = all_elements(g);
  return assemble_elements(g, elems, g.num_nodes(), [](int n) { return n; }, kernel);
}

template <class Kernel>
SparseMatrix assemble_patch(const Grid& g, const Patch& p, Kernel&& kernel)
{
  const int nps = g.nodes_per_side();
  return assemble_elements(g, p.elements, p.num_nodes(), [&p, nps](int n) { return p.local_index(n, nps); }, kernel);
}

inline void check_cell_field(const Grid& g, std::size_t size, const char* what)
{
  if (size != static_cast<std::size_t>(g.num_cells()))
    throw DomainError(fmt::format("{}: field has {} cell values, grid has {} cells", what, size, g.num_cells()));
}

inline void check_positive(const CellField& kappa, const char* what)
{
  for (double k : kappa)
    if (!(k > 0.0)) throw DomainError(fmt::format("{}: coefficient must be positive", what));
}

} // namespace detail

/// Expands a cellwise field to one value per triangle.
inline ElementField to_elements(const Grid& g, const CellField& w)
{
  detail::check_cell_field(g, w.size(), "to_elements");
  ElementField out(g.num_triangles());
  for (int t = 0; t < g.num_triangles(); ++t) out[t] = w[Grid::cell_of(t)];
  return out;
}

// ---------------------------------------------------------------------------
// Global assembly (all fine nodes, before Dirichlet elimination)
// ---------------------------------------------------------------------------

inline SparseMatrix assemble_stiffness(const Grid& g, const CellField& kappa)
{
  detail::check_cell_field(g, kappa.size(), "assemble_stiffness");
  detail::check_positive(kappa, "assemble_stiffness");
  return detail::assemble_global(g, [&](int t, const ElementGeometry& geo) { return element_stiffness(geo, kappa[Grid::cell_of(t)]); });
}

inline SparseMatrix assemble_weighted_mass(const Grid& g, const CellField& w)
{
  detail::check_cell_field(g, w.size(), "assemble_weighted_mass");
  return detail::assemble_global(g, [&](int t, const ElementGeometry& geo) { return element_mass(geo, w[Grid::cell_of(t)]); });
}

inline SparseMatrix assemble_weighted_mass_elementwise(const Grid& g, const ElementField& w)
{
  if (w.size() != static_cast<std::size_t>(g.num_triangles())) throw DomainError("assemble_weighted_mass: per-element field size mismatch");
  return detail::assemble_global(g, [&](int t, const ElementGeometry& geo) { return element_mass(geo, w[t]); });
}

inline SparseMatrix assemble_convection(const Grid& g, const CellVectorField& b)
{
  detail::check_cell_field(g, b.size(), "assemble_convection");
  return detail::assemble_global(g, [&](int t, const ElementGeometry& geo) { return element_convection(geo, b[Grid::cell_of(t)]); });
}

// ---------------------------------------------------------------------------
// Local forms on a coarse neighborhood (integrals over omega_j only)
// ---------------------------------------------------------------------------

inline SparseMatrix local_stiffness(const Grid& g, const Patch& p, const CellField& kappa)
{
  detail::check_cell_field(g, kappa.size(), "local_stiffness");
  return detail::assemble_patch(g, p, [&](int t, const ElementGeometry& geo) { return element_stiffness(geo, kappa[Grid::cell_of(t)]); });
}

inline SparseMatrix local_mass(const Grid& g, const Patch& p, const CellField& w)
{
  detail::check_cell_field(g, w.size(), "local_mass");
  return detail::assemble_patch(g, p, [&](int t, const ElementGeometry& geo) { return element_mass(geo, w[Grid::cell_of(t)]); });
}

inline SparseMatrix local_mass_elementwise(const Grid& g, const Patch& p, const ElementField& w)
{
  return detail::assemble_patch(g, p, [&](int t, const ElementGeometry& geo) { return element_mass(geo, w[t]); });
}

/// Values of a nodal vector at the patch nodes, in local order.
inline Vector restrict_local(const Vector& global, const Patch& p)
{
  Vector out(p.num_nodes());
  for (int l = 0; l < p.num_nodes(); ++l) {
    if (p.nodes[l] < 0 || p.nodes[l] >= global.size()) throw std::out_of_range("restrict_local: node index out of range");
    out[l] = global[p.nodes[l]];
  }
  return out;
}

/// Sub-matrix of a nodal matrix on the given (global) index list, in list order.
inline SparseMatrix extract_submatrix(const SparseMatrix& A, std::span<const int> index)
{
  std::vector<int> pos(A.rows(), -1);
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] < 0 || index[k] >= A.rows()) throw std::out_of_range("extract_submatrix: index out of range");
    pos[index[k]] = static_cast<int>(k);
  }
  Triplets trips;
  for (int col = 0; col < A.outerSize(); ++col) {
    if (pos[col] < 0) continue;
    for (SparseMatrix::InnerIterator it(A, col); it; ++it)
      if (pos[it.row()] >= 0) trips.emplace_back(pos[it.row()], pos[col], it.value());
  }
  SparseMatrix S(static_cast<Eigen::Index>(index.size()), static_cast<Eigen::Index>(index.size()));
  S.setFromTriplets(trips.begin(), trips.end());
  return S;
}

/// Inverse of extract_submatrix: places a local matrix into an n x n zero matrix.
inline SparseMatrix embed_submatrix(const SparseMatrix& local, std::span<const int> index, int n)
{
  Triplets trips;
  for (int col = 0; col < local.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(local, col); it; ++it) trips.emplace_back(index[it.row()], index[col], it.value());
  SparseMatrix A(n, n);
  A.setFromTriplets(trips.begin(), trips.end());
  return A;
}

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

inline double max_abs(const SparseMatrix& A)
{
  double m = 0.0;
  for (int col = 0; col < A.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(A, col); it; ++it) m = std::max(m, std::abs(it.value()));
  return m;
}

inline bool is_symmetric(const SparseMatrix& A, double rel_tol = 1e-12)
{
  if (A.rows() != A.cols()) return false;
  const SparseMatrix At = A.transpose();
  const SparseMatrix D = A - At;
  return max_abs(D) <= rel_tol * max_abs(A);
}

/// [A11 A12; A21 A22] for square blocks of equal size.
inline SparseMatrix make_block(const SparseMatrix& A11, const SparseMatrix& A12, const SparseMatrix& A21, const SparseMatrix& A22)
{
  const auto n = A11.rows();
  Triplets trips;
  trips.reserve(A11.nonZeros() + A12.nonZeros() + A21.nonZeros() + A22.nonZeros());
  auto add = [&](const SparseMatrix& M, Eigen::Index r0, Eigen::Index c0) {
    for (int col = 0; col < M.outerSize(); ++col)
      for (SparseMatrix::InnerIterator it(M, col); it; ++it) trips.emplace_back(r0 + it.row(), c0 + col, it.value());
  };
  add(A11, 0, 0);
  add(A12, 0, n);
  add(A21, n, 0);
  add(A22, n, n);
  SparseMatrix B(2 * n, 2 * n);
  B.setFromTriplets(trips.begin(), trips.end());
  return B;
}

inline SparseMatrix restrict_to_free(const Grid& g, const SparseMatrix& A)
{
  return extract_submatrix(A, g.free_nodes());
}

/// Coordinate-format dump: one "row col value" line per stored entry, 0-based.
inline void write_coo(const std::string& path, const SparseMatrix& A)
{
  std::ofstream out(path);
  if (!out) throw IoError("cannot write matrix dump " + path);
  out << "% " << A.rows() << ' ' << A.cols() << ' ' << A.nonZeros() << '\n';
  for (int col = 0; col < A.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(A, col); it; ++it) out << fmt::format("{} {} {:.17g}\n", it.row(), col, it.value());
}

// ---------------------------------------------------------------------------
// Load vectors
// ---------------------------------------------------------------------------

/// int f phi_m for a cellwise constant source (exact).
inline Vector load_vector(const Grid& g, const CellField& f)
{
  detail::check_cell_field(g, f.size(), "load_vector");
  Vector F = Vector::Zero(g.num_nodes());
  for (int t = 0; t < g.num_triangles(); ++t) {
    const double v = f[Grid::cell_of(t)] * g.triangle_area(t) / 3.0;
    for (int n : g.triangle(t)) F[n] += v;
  }
  return F;
}

/// int f phi_m for a smooth source, edge-midpoint rule (exact for quadratics).
template <class Fn>
Vector load_vector_fn(const Grid& g, Fn&& f)
{
  Vector F = Vector::Zero(g.num_nodes());
  for (int t = 0; t < g.num_triangles(); ++t) {
    const auto& tri = g.triangle(t);
    const double w = g.triangle_area(t) / 3.0;
    for (int e = 0; e < 3; ++e) {
      const int a = tri[e], b = tri[(e + 1) % 3];
      const Point mid{0.5 * (g.coord(a)[0] + g.coord(b)[0]), 0.5 * (g.coord(a)[1] + g.coord(b)[1])};
      const double fv = w * f(mid[0], mid[1]);
      F[a] += 0.5 * fv;
      F[b] += 0.5 * fv;
    }
  }
  return F;
}

// ---------------------------------------------------------------------------
// Block system
// ---------------------------------------------------------------------------

/**
 * @brief Free-DOF operators of the coupled system.
 *
 * Unknowns are stacked as [u1 on free nodes; u2 on free nodes]. With A_i the
 * kappa_i-stiffness, N_i the b_i-convection and M_w a w-weighted mass,
 *
 *   B   = [A1 + N1 + M_Q1, -N1 - M_Q1; -N2 - M_Q2, A2 + N2 + M_Q2]   (form b)
 *   C   = diag(M_C11, M_C22)                                          (form c)
 *   A   = diag(A1, A2)                                                (form a)
 *   AQs = [A1 + M_Qs, -M_Qs; -M_Qs, A2 + M_Qs]                        (form a + q_s)
 *   L2  = diag(M_1, M_1)                                              (unweighted L2)
 */
struct BlockSystem {
  int n_free = 0;
  SparseMatrix A1, A2, N1, N2, MQ1, MQ2, MC1, MC2, M;
  SparseMatrix B, C, A, AQs, L2;

  int size() const { return 2 * n_free; }
};

inline BlockSystem assemble_block_system(const Grid& g, const FieldSet& fs)
{
  fs.check_bound_to(g);
  const auto derived = derived_fields(fs);
  const CellField ones(fs.size(), 1.0);

  BlockSystem s;
  s.n_free = g.num_free();
  s.A1 = restrict_to_free(g, assemble_stiffness(g, fs.kappa1));
  s.A2 = restrict_to_free(g, assemble_stiffness(g, fs.kappa2));
  s.N1 = restrict_to_free(g, assemble_convection(g, fs.b1));
  s.N2 = restrict_to_free(g, assemble_convection(g, fs.b2));
  s.MQ1 = restrict_to_free(g, assemble_weighted_mass(g, fs.q1));
  s.MQ2 = restrict_to_free(g, assemble_weighted_mass(g, fs.q2));
  s.MC1 = restrict_to_free(g, assemble_weighted_mass(g, fs.c11));
  s.MC2 = restrict_to_free(g, assemble_weighted_mass(g, fs.c22));
  s.M = restrict_to_free(g, assemble_weighted_mass(g, ones));
  const SparseMatrix MQs = restrict_to_free(g, assemble_weighted_mass(g, derived.q_s));

  const SparseMatrix c1 = s.N1 + s.MQ1;
  const SparseMatrix c2 = s.N2 + s.MQ2;
  const SparseMatrix zero(s.n_free, s.n_free);
  s.B = make_block(s.A1 + c1, -c1, -c2, s.A2 + c2);
  s.C = make_block(s.MC1, zero, zero, s.MC2);
  s.A = make_block(s.A1, zero, zero, s.A2);
  s.AQs = make_block(s.A1 + MQs, -MQs, -MQs, s.A2 + MQs);
  s.L2 = make_block(s.M, zero, zero, s.M);
  return s;
}

/// Stacks two full nodal load vectors into the free-DOF layout of a BlockSystem.
inline Vector block_load(const Grid& g, const Vector& F1, const Vector& F2)
{
  const int nf = g.num_free();
  Vector F(2 * nf);
  for (int k = 0; k < nf; ++k) {
    F[k] = F1[g.free_nodes()[k]];
    F[nf + k] = F2[g.free_nodes()[k]];
  }
  return F;
}

/// Block load for cellwise constant sources f1, f2.
inline Vector block_load(const Grid& g, double f1, double f2)
{
  return block_load(g, load_vector(g, CellField(g.num_cells(), f1)), load_vector(g, CellField(g.num_cells(), f2)));
}

} // namespace dcgms
