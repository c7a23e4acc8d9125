#pragma once

/** @file msbasis.hpp
    @brief Partition of unity, snapshot spaces, local spectral problems and the multiscale space.

    Two flavours are supported:

    - uncoupled: per continuum i, snapshots are kappa_i-harmonic extensions of boundary
      deltas, the spectral problem is a_i^(j) vs s_i^(j), and each selected mode yields one
      basis function living in continuum i only.
    - coupled: snapshots solve the Q_s-coupled local system with boundary data delta_k e_r,
      the spectral problem is a_Qs^(j) vs s^(j) = s_1^(j) + s_2^(j), and each mode yields a
      paired basis function (chi_{j,1} psi_1, chi_{j,2} psi_2).

    The convection terms and Q_a never enter the basis construction.
*/

#include "assembly.hpp"
#include "coeffs.hpp"
#include "errors.hpp"
#include "grid.hpp"
#include "parallel.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

namespace dcgms {

using DenseMatrix = Eigen::MatrixXd;

enum class BasisMode { uncoupled, coupled };

inline const char* to_string(BasisMode m) { return m == BasisMode::uncoupled ? "uncoupled" : "coupled"; }

inline BasisMode parse_basis_mode(const std::string& s)
{
  if (s == "uncoupled") return BasisMode::uncoupled;
  if (s == "coupled") return BasisMode::coupled;
  throw DomainError("unknown basis mode '" + s + "' (expected coupled or uncoupled)");
}

// ---------------------------------------------------------------------------
// Local harmonic extension
// ---------------------------------------------------------------------------

/// Rows `rows` and columns `cols` of A as a sparse rows.size() x cols.size() matrix.
inline SparseMatrix extract_block(const SparseMatrix& A, std::span<const int> rows, std::span<const int> cols)
{
  std::vector<int> rpos(A.rows(), -1), cpos(A.cols(), -1);
  for (std::size_t k = 0; k < rows.size(); ++k) rpos[rows[k]] = static_cast<int>(k);
  for (std::size_t k = 0; k < cols.size(); ++k) cpos[cols[k]] = static_cast<int>(k);
  Triplets trips;
  for (int col = 0; col < A.outerSize(); ++col) {
    if (cpos[col] < 0) continue;
    for (SparseMatrix::InnerIterator it(A, col); it; ++it)
      if (rpos[it.row()] >= 0) trips.emplace_back(rpos[it.row()], cpos[col], it.value());
  }
  SparseMatrix B(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  B.setFromTriplets(trips.begin(), trips.end());
  return B;
}

/**
 * @brief Solves (A x)_I = 0 with x_G = data for every column of `data`.
 *
 * Returns the full local vectors (A.rows() x data.cols()). `spd` selects a Cholesky
 * factorization of A_II, otherwise sparse LU is used.
 */
inline DenseMatrix harmonic_extension(const SparseMatrix& A, std::span<const int> interior, std::span<const int> boundary,
                                      const DenseMatrix& data, bool spd, const std::string& context)
{
  DenseMatrix X = DenseMatrix::Zero(A.rows(), data.cols());
  for (std::size_t b = 0; b < boundary.size(); ++b) X.row(boundary[b]) = data.row(static_cast<Eigen::Index>(b));
  if (interior.empty()) return X;

  const SparseMatrix AII = extract_block(A, interior, interior);
  const SparseMatrix AIG = extract_block(A, interior, boundary);
  const DenseMatrix rhs = -(AIG * data);
  DenseMatrix XI;
  if (spd) {
    Eigen::SimplicialLLT<SparseMatrix> llt(AII);
    if (llt.info() != Eigen::Success) throw SolverError(context + ": local Cholesky factorization failed");
    XI = llt.solve(rhs);
  }
  else {
    Eigen::SparseLU<SparseMatrix> lu;
    lu.analyzePattern(AII);
    lu.factorize(AII);
    if (lu.info() != Eigen::Success) throw SolverError(context + ": local LU factorization failed (singular local system)");
    XI = lu.solve(rhs);
  }
  const double scale = std::max(rhs.norm(), std::numeric_limits<double>::min());
  const double res = (AII * XI - rhs).norm() / scale;
  if (!std::isfinite(res) || res > 1e-10) throw SolverError(fmt::format("{}: local solve residual {:.3e}", context, res), res);
  for (std::size_t i = 0; i < interior.size(); ++i) X.row(interior[i]) = XI.row(static_cast<Eigen::Index>(i));
  return X;
}

// ---------------------------------------------------------------------------
// Partition of unity
// ---------------------------------------------------------------------------

/**
 * @brief Multiscale partition of unity chi_{j,i} for one continuum.
 *
 * Functions are stored for every coarse vertex (boundary vertices included) so that
 * they sum to one on the whole domain; only interior vertices carry basis functions.
 */
struct PartitionOfUnity {
  int nc = 0;
  std::vector<Patch> patches; ///< indexed by I + J*(nc+1)
  std::vector<Vector> values; ///< nodal values on the patch, local order

  int vertex_id(int I, int J) const { return I + J * (nc + 1); }

  const Vector& interior(const Grid& g, int j) const
  {
    const auto [I, J] = g.interior_vertex(j);
    return values[vertex_id(I, J)];
  }

  Vector to_global(const Grid& g, int vertex) const
  {
    Vector out = Vector::Zero(g.num_nodes());
    const auto& p = patches[vertex];
    for (int l = 0; l < p.num_nodes(); ++l) out[p.nodes[l]] = values[vertex][l];
    return out;
  }

  /// Sum over all coarse vertices, as a global nodal vector.
  Vector sum(const Grid& g) const
  {
    Vector out = Vector::Zero(g.num_nodes());
    for (std::size_t v = 0; v < patches.size(); ++v)
      for (int l = 0; l < patches[v].num_nodes(); ++l) out[patches[v].nodes[l]] += values[v][l];
    return out;
  }
};

/**
 * @brief Builds chi_{j,i}: on each coarse block K, -div(kappa grad chi) = 0 with the
 *        bilinear hat of the vertex as boundary data on dK.
 */
inline PartitionOfUnity build_pou(const Grid& g, const CellField& kappa)
{
  detail::check_positive(kappa, "build_pou");
  const int nc = g.nc(), nps = g.nodes_per_side();
  PartitionOfUnity pou;
  pou.nc = nc;
  for (int J = 0; J <= nc; ++J)
    for (int I = 0; I <= nc; ++I) {
      pou.patches.push_back(g.vertex_patch(I, J));
      pou.values.push_back(Vector::Zero(pou.patches.back().num_nodes()));
    }

  for (int by = 0; by < nc; ++by)
    for (int bx = 0; bx < nc; ++bx) {
      const Patch K = g.block_patch(bx, by);
      const SparseMatrix AK = local_stiffness(g, K, kappa);

      // columns: the four corner hats of K
      const std::array<std::array<int, 2>, 4> corners{{{bx, by}, {bx + 1, by}, {bx, by + 1}, {bx + 1, by + 1}}};
      DenseMatrix data(K.boundary.size(), 4);
      for (std::size_t b = 0; b < K.boundary.size(); ++b) {
        const Point& x = g.coord(K.nodes[K.boundary[b]]);
        for (int c = 0; c < 4; ++c) {
          const Point v = g.vertex_coord(corners[c][0], corners[c][1]);
          data(static_cast<Eigen::Index>(b), c) =
              std::max(0.0, 1.0 - std::abs(x[0] - v[0]) * nc) * std::max(0.0, 1.0 - std::abs(x[1] - v[1]) * nc);
        }
      }
      const DenseMatrix chi = harmonic_extension(AK, K.interior, K.boundary, data, true,
                                                 fmt::format("build_pou: coarse block ({}, {})", bx, by));

      for (int c = 0; c < 4; ++c) {
        const int vid = pou.vertex_id(corners[c][0], corners[c][1]);
        const Patch& P = pou.patches[vid];
        for (int l = 0; l < K.num_nodes(); ++l) pou.values[vid][P.local_index(K.nodes[l], nps)] = chi(l, c);
      }
    }
  return pou;
}

/// Per-triangle weight kappa * sum_j |grad chi_j|^2 over the interior coarse vertices.
inline ElementField s_weight(const Grid& g, const CellField& kappa, const PartitionOfUnity& pou)
{
  detail::check_cell_field(g, kappa.size(), "s_weight");
  if (pou.nc != g.nc() || pou.values.size() != static_cast<std::size_t>((g.nc() + 1) * (g.nc() + 1)))
    throw DomainError("s_weight: partition of unity is incomplete or bound to another grid");

  ElementField grad2(g.num_triangles(), 0.0);
  const int nps = g.nodes_per_side();
  for (int j = 0; j < g.num_interior_vertices(); ++j) {
    const auto [I, J] = g.interior_vertex(j);
    const int vid = pou.vertex_id(I, J);
    const Patch& P = pou.patches[vid];
    const Vector& chi = pou.values[vid];
    for (int t : P.elements) {
      const auto geo = element_geometry(g, t);
      const auto& tri = g.triangle(t);
      Vec2 grad{0.0, 0.0};
      for (int m = 0; m < 3; ++m) {
        const double v = chi[P.local_index(tri[m], nps)];
        grad[0] += v * geo.grad[m][0];
        grad[1] += v * geo.grad[m][1];
      }
      grad2[t] += grad[0] * grad[0] + grad[1] * grad[1];
    }
  }
  for (int t = 0; t < g.num_triangles(); ++t) grad2[t] *= kappa[Grid::cell_of(t)];
  return grad2;
}

/// Global s_i matrix: mass matrix weighted with kappa_i * sum_j |grad chi_{j,i}|^2.
inline SparseMatrix assemble_s_matrix(const Grid& g, const CellField& kappa, const PartitionOfUnity& pou)
{
  return assemble_weighted_mass_elementwise(g, s_weight(g, kappa, pou));
}

// ---------------------------------------------------------------------------
// Snapshots
// ---------------------------------------------------------------------------

struct SnapshotSpace {
  BasisMode mode = BasisMode::uncoupled;
  int neighborhood = -1;
  int local_nodes = 0;  ///< nodes of omega_j; coupled columns have 2*local_nodes rows
  DenseMatrix columns;  ///< uncoupled: J_j columns; coupled: column r*J_j + k is delta_k e_r
};

/// kappa-harmonic extensions of the boundary deltas on omega_j, with the patch supplied.
inline SnapshotSpace build_uncoupled_snapshots(const Grid& g, const Patch& p, int j, const CellField& kappa)
{
  const SparseMatrix A = local_stiffness(g, p, kappa);
  const auto J = static_cast<Eigen::Index>(p.boundary.size());
  SnapshotSpace s;
  s.mode = BasisMode::uncoupled;
  s.neighborhood = j;
  s.local_nodes = p.num_nodes();
  s.columns = harmonic_extension(A, p.interior, p.boundary, DenseMatrix::Identity(J, J), true,
                                 fmt::format("uncoupled snapshots, neighborhood {}", j));
  return s;
}

inline SnapshotSpace build_uncoupled_snapshots(const Grid& g, int j, const CellField& kappa)
{
  return build_uncoupled_snapshots(g, neighborhood(g, j), j, kappa);
}

/// Local a_Qs^(j) operator on omega_j: [A1 + M, -M; -M, A2 + M] with M the Q_s-weighted mass.
inline SparseMatrix local_aqs(const Grid& g, const Patch& p, const CellField& kappa1, const CellField& kappa2, const CellField& q_s)
{
  const SparseMatrix A1 = local_stiffness(g, p, kappa1);
  const SparseMatrix A2 = local_stiffness(g, p, kappa2);
  const SparseMatrix M = local_mass(g, p, q_s);
  return make_block(A1 + M, -M, -M, A2 + M);
}

namespace detail {

inline std::pair<std::vector<int>, std::vector<int>> paired_indices(const Patch& p)
{
  const int n = p.num_nodes();
  std::vector<int> interior, boundary;
  for (int r = 0; r < 2; ++r) {
    for (int i : p.interior) interior.push_back(i + r * n);
    for (int b : p.boundary) boundary.push_back(b + r * n);
  }
  return {interior, boundary};
}

} // namespace detail

inline SnapshotSpace build_coupled_snapshots(const Grid& g, const Patch& p, int j, const CellField& kappa1, const CellField& kappa2,
                                             const CellField& q_s)
{
  const SparseMatrix A = local_aqs(g, p, kappa1, kappa2, q_s);
  const auto [interior, boundary] = detail::paired_indices(p);
  const auto J2 = static_cast<Eigen::Index>(boundary.size());
  SnapshotSpace s;
  s.mode = BasisMode::coupled;
  s.neighborhood = j;
  s.local_nodes = p.num_nodes();
  s.columns = harmonic_extension(A, interior, boundary, DenseMatrix::Identity(J2, J2), false,
                                 fmt::format("coupled snapshots, neighborhood {}", j));
  return s;
}

inline SnapshotSpace build_coupled_snapshots(const Grid& g, int j, const CellField& kappa1, const CellField& kappa2, const CellField& q_s)
{
  return build_coupled_snapshots(g, neighborhood(g, j), j, kappa1, kappa2, q_s);
}

// ---------------------------------------------------------------------------
// Spectral problem
// ---------------------------------------------------------------------------

struct SpectralSelection {
  std::vector<double> eigenvalues; ///< ascending
  DenseMatrix coefficients;        ///< column k: eigenvector in the snapshot basis, s-normalized
  DenseMatrix modes;               ///< column k: nodal values (snapshots * coefficients)
  DenseMatrix a_bar, s_bar;        ///< projected forms
  int effective_rank = 0;          ///< snapshot directions with nonzero s-mass; one eigenpair each
  bool jittered = false;

  int size() const { return static_cast<int>(eigenvalues.size()); }
};

/**
 * @brief Solves a(psi, v) = lambda s(psi, v) on the snapshot span.
 *
 * Both forms are projected onto the snapshot columns and the dense symmetric-definite
 * problem is solved. Directions with no s-mass (the delta at a domain corner, whose
 * support is a single triangle on which every chi_j vanishes) carry infinite eigenvalues;
 * they are eliminated by a Schur complement on the a-form, which leaves the finite
 * spectrum unchanged. If the Cholesky factorization of what remains fails, a diagonal
 * shift of 1e-12 * trace/dim is added once.
 */
inline SpectralSelection solve_spectral(const SnapshotSpace& snaps, const SparseMatrix& a_local, const SparseMatrix& s_local)
{
  const DenseMatrix& Phi = snaps.columns;
  if (a_local.rows() != Phi.rows() || s_local.rows() != Phi.rows()) throw DomainError("solve_spectral: local form size does not match snapshots");

  SpectralSelection sel;
  sel.a_bar = Phi.transpose() * (a_local * Phi);
  sel.s_bar = Phi.transpose() * (s_local * Phi);
  sel.a_bar = 0.5 * (sel.a_bar + sel.a_bar.transpose()).eval();
  sel.s_bar = 0.5 * (sel.s_bar + sel.s_bar.transpose()).eval();
  const auto dim = sel.s_bar.rows();

  // split the snapshot span into the s-null part and its complement
  const Eigen::SelfAdjointEigenSolver<DenseMatrix> ses(sel.s_bar);
  if (ses.info() != Eigen::Success) throw SolverError(fmt::format("solve_spectral: s-form decomposition failed on neighborhood {}", snaps.neighborhood));
  const double top = ses.eigenvalues().cwiseAbs().maxCoeff();
  const auto nnull = static_cast<Eigen::Index>((ses.eigenvalues().array() <= 1e-12 * top).count());

  DenseMatrix A = sel.a_bar, S = sel.s_bar, lift; // coefficients = lift * reduced eigenvectors
  if (nnull == 0) {
    lift = DenseMatrix::Identity(dim, dim);
  }
  else {
    // eigenvalues ascend, so the null directions come first
    const DenseMatrix U0 = ses.eigenvectors().leftCols(nnull);
    const DenseMatrix Ur = ses.eigenvectors().rightCols(dim - nnull);
    const DenseMatrix A00 = U0.transpose() * sel.a_bar * U0;
    const DenseMatrix A0r = U0.transpose() * sel.a_bar * Ur;
    const Eigen::LDLT<DenseMatrix> ldlt(A00);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || (ldlt.vectorD().array() <= 0.0).any())
      throw SolverError(fmt::format("solve_spectral: neighborhood {} has snapshots with neither energy nor s-mass", snaps.neighborhood));
    lift = Ur - U0 * ldlt.solve(A0r);
    A = lift.transpose() * sel.a_bar * lift;
    S = lift.transpose() * sel.s_bar * lift;
    A = 0.5 * (A + A.transpose()).eval();
    S = 0.5 * (S + S.transpose()).eval();
  }
  const auto rank = S.rows();

  if (Eigen::LLT<DenseMatrix>(S).info() != Eigen::Success) {
    S.diagonal().array() += 1e-12 * S.trace() / static_cast<double>(rank);
    sel.jittered = true;
    if (Eigen::LLT<DenseMatrix>(S).info() != Eigen::Success) {
      const auto positive = (ses.eigenvalues().array() > 1e-12 * top).count();
      throw SolverError(fmt::format("solve_spectral: projected s-form of neighborhood {} is not positive definite "
                                    "(effective rank {} of {})",
                                    snaps.neighborhood, positive, dim));
    }
  }
  sel.effective_rank = static_cast<int>(rank);

  const Eigen::GeneralizedSelfAdjointEigenSolver<DenseMatrix> ges(A, S, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
  if (ges.info() != Eigen::Success) throw SolverError(fmt::format("solve_spectral: eigensolver failed on neighborhood {}", snaps.neighborhood));

  std::vector<int> order(static_cast<std::size_t>(rank));
  std::iota(order.begin(), order.end(), 0);
  const auto& ev = ges.eigenvalues();
  std::stable_sort(order.begin(), order.end(), [&ev](int a, int b) { return ev[a] < ev[b]; });

  sel.eigenvalues.resize(order.size());
  sel.coefficients.resize(dim, rank);
  for (Eigen::Index k = 0; k < rank; ++k) {
    sel.eigenvalues[k] = ev[order[k]];
    sel.coefficients.col(k) = lift * ges.eigenvectors().col(order[k]);
  }
  sel.modes = Phi * sel.coefficients;
  return sel;
}

// ---------------------------------------------------------------------------
// Offline stage and multiscale space
// ---------------------------------------------------------------------------

/// Everything that does not depend on the number of selected modes.
struct OfflineBasis {
  BasisMode mode = BasisMode::uncoupled;
  std::array<PartitionOfUnity, 2> pou;
  std::vector<Patch> neighborhoods;
  /// spectra[j][i]: uncoupled has one entry per continuum, coupled a single paired entry
  std::vector<std::vector<SpectralSelection>> spectra;
};

inline OfflineBasis build_offline(const Grid& g, const FieldSet& fs, BasisMode mode, int threads = 0)
{
  fs.check_bound_to(g);
  OfflineBasis off;
  off.mode = mode;
  off.pou[0] = build_pou(g, fs.kappa1);
  off.pou[1] = build_pou(g, fs.kappa2);
  const ElementField w1 = s_weight(g, fs.kappa1, off.pou[0]);
  const ElementField w2 = s_weight(g, fs.kappa2, off.pou[1]);
  const CellField q_s = derived_fields(fs).q_s;

  const int nv = g.num_interior_vertices();
  off.neighborhoods.resize(nv);
  off.spectra.resize(nv);
  // each neighborhood writes only its own slot, so the result is independent of scheduling
  parallel_for(
      nv,
      [&](int j) {
        const Patch p = neighborhood(g, j);
        const SparseMatrix S1 = local_mass_elementwise(g, p, w1);
        const SparseMatrix S2 = local_mass_elementwise(g, p, w2);
        std::vector<SpectralSelection> sel;
        if (mode == BasisMode::uncoupled) {
          const auto snap1 = build_uncoupled_snapshots(g, p, j, fs.kappa1);
          sel.push_back(solve_spectral(snap1, local_stiffness(g, p, fs.kappa1), S1));
          const auto snap2 = build_uncoupled_snapshots(g, p, j, fs.kappa2);
          sel.push_back(solve_spectral(snap2, local_stiffness(g, p, fs.kappa2), S2));
        }
        else {
          const auto snap = build_coupled_snapshots(g, p, j, fs.kappa1, fs.kappa2, q_s);
          const SparseMatrix zero(p.num_nodes(), p.num_nodes());
          sel.push_back(solve_spectral(snap, local_aqs(g, p, fs.kappa1, fs.kappa2, q_s), make_block(S1, zero, zero, S2)));
        }
        off.neighborhoods[j] = p;
        off.spectra[j] = std::move(sel);
      },
      threads);
  return off;
}

/// min over neighborhoods (and continua) of lambda_{L_j+1}; +inf when every spectrum is exhausted.
inline double spectral_tail(const std::vector<std::vector<SpectralSelection>>& spectra, std::span<const int> L)
{
  double lambda = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < spectra.size(); ++j)
    for (const auto& sel : spectra[j])
      if (L[j] < sel.size()) lambda = std::min(lambda, sel.eigenvalues[L[j]]);
  return lambda;
}

struct MultiscaleSpace {
  BasisMode mode = BasisMode::uncoupled;
  SparseMatrix R;                               ///< (2 * free nodes) x dim prolongation
  std::vector<std::pair<int, int>> column_range; ///< per neighborhood, [begin, end)
  std::vector<int> L;
  double lambda = std::numeric_limits<double>::infinity();

  int dim() const { return static_cast<int>(R.cols()); }
};

/**
 * @brief Multiplies the first L_j eigenmodes of each neighborhood by chi_j and places
 *        them as columns of the prolongation.
 *
 * Columns are ordered by neighborhood, then (uncoupled) by continuum, then by mode.
 */
inline MultiscaleSpace assemble_ms_space(const Grid& g, const OfflineBasis& off, std::span<const int> L)
{
  const int nv = g.num_interior_vertices();
  if (static_cast<int>(L.size()) != nv || static_cast<int>(off.spectra.size()) != nv)
    throw DomainError(fmt::format("assemble_ms_space: need {} per-neighborhood counts", nv));

  const int nfree = g.num_free();
  MultiscaleSpace ms;
  ms.mode = off.mode;
  ms.L.assign(L.begin(), L.end());
  Triplets trips;
  int col = 0;
  for (int j = 0; j < nv; ++j) {
    const Patch& p = off.neighborhoods[j];
    const int n = p.num_nodes();
    for (const auto& sel : off.spectra[j])
      if (L[j] < 0 || L[j] > sel.size())
        throw DomainError(fmt::format("assemble_ms_space: L = {} exceeds the {} eigenpairs of neighborhood {}", L[j], sel.size(), j));

    const int begin = col;
    auto emit = [&](const Vector& chi, const auto& values, int offset) {
      for (int l = 0; l < n; ++l) {
        const int f = g.free_index(p.nodes[l]);
        const double v = chi[l] * values[l];
        if (f >= 0 && v != 0.0) trips.emplace_back(offset * nfree + f, col, v);
      }
    };
    if (off.mode == BasisMode::uncoupled) {
      for (int i = 0; i < 2; ++i) {
        const Vector& chi = off.pou[i].interior(g, j);
        for (int k = 0; k < L[j]; ++k, ++col) emit(chi, off.spectra[j][i].modes.col(k), i);
      }
    }
    else {
      const Vector& chi1 = off.pou[0].interior(g, j);
      const Vector& chi2 = off.pou[1].interior(g, j);
      for (int k = 0; k < L[j]; ++k, ++col) {
        const auto mode = off.spectra[j][0].modes.col(k);
        emit(chi1, mode.head(n), 0);
        emit(chi2, mode.tail(n), 1);
      }
    }
    ms.column_range.emplace_back(begin, col);
  }
  ms.R.resize(2 * nfree, col);
  ms.R.setFromTriplets(trips.begin(), trips.end());
  ms.lambda = spectral_tail(off.spectra, L);
  return ms;
}

inline MultiscaleSpace assemble_ms_space(const Grid& g, const OfflineBasis& off, int L)
{
  const std::vector<int> Ls(g.num_interior_vertices(), L);
  return assemble_ms_space(g, off, Ls);
}

} // namespace dcgms
