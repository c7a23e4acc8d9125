#pragma once

/** @file fine_solver.hpp
    @brief Reference fine-scale solves: static and backward-Euler dynamic.
*/

#include "assembly.hpp"
#include "errors.hpp"
#include "grid.hpp"

#include <Eigen/SparseLU>

#include <cmath>
#include <string>
#include <vector>

#include <fmt/format.h>

namespace dcgms {

/// Nodal values of both continua on all fine nodes; zero on Dirichlet nodes.
struct SolutionField {
  Vector u1, u2;
  double time = 0.0;
};

/// Expands a stacked free-DOF vector [u1; u2] to full nodal vectors.
inline SolutionField to_field(const Grid& g, const Vector& x)
{
  const int nf = g.num_free();
  if (x.size() != 2 * nf) throw DomainError(fmt::format("to_field: expected {} entries, got {}", 2 * nf, x.size()));
  SolutionField s;
  s.u1 = Vector::Zero(g.num_nodes());
  s.u2 = Vector::Zero(g.num_nodes());
  for (int k = 0; k < nf; ++k) {
    s.u1[g.free_nodes()[k]] = x[k];
    s.u2[g.free_nodes()[k]] = x[nf + k];
  }
  return s;
}

inline Vector to_free(const Grid& g, const SolutionField& s)
{
  return block_load(g, s.u1, s.u2);
}

/// b - A x with long double accumulation; used to drive iterative refinement past the
/// double-precision residual floor of high-contrast systems.
inline Vector extended_residual(const SparseMatrix& A, const Vector& x, const Vector& b)
{
  std::vector<long double> r(b.data(), b.data() + b.size());
  for (Eigen::Index c = 0; c < A.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(A, c); it; ++it) r[it.row()] -= static_cast<long double>(it.value()) * x[c];
  Vector out(b.size());
  for (Eigen::Index k = 0; k < b.size(); ++k) out[k] = static_cast<double>(r[k]);
  return out;
}

/**
 * @brief Sparse LU with a residual gate and a few steps of mixed-precision refinement.
 *
 * Every solve is checked against ||A x - b|| <= tol * ||b||; SolverError otherwise.
 */
class LinearSolver {
public:
  explicit LinearSolver(const SparseMatrix& A, double tol = 1e-10) : A_(A), tol_(tol)
  {
    lu_.analyzePattern(A_);
    lu_.factorize(A_);
    if (lu_.info() != Eigen::Success) throw SolverError("sparse LU factorization failed (singular or near-singular system)");
  }

  Vector solve(const Vector& b) const
  {
    const double bnorm = b.norm();
    if (bnorm == 0.0) return Vector::Zero(b.size());
    Vector x = lu_.solve(b);
    Vector r = extended_residual(A_, x, b);
    double res = r.norm() / bnorm;
    for (int it = 0; it < 4 && res > tol_; ++it) {
      x += lu_.solve(r);
      r = extended_residual(A_, x, b);
      res = r.norm() / bnorm;
    }
    if (!std::isfinite(res) || res > tol_)
      throw SolverError(fmt::format("linear solve reached relative residual {:.3e} > {:.1e}", res, tol_), res);
    last_residual_ = res;
    return x;
  }

  double last_residual() const { return last_residual_; }

private:
  SparseMatrix A_;
  double tol_;
  mutable Eigen::SparseLU<SparseMatrix> lu_;
  mutable double last_residual_ = 0.0;
};

/// Solves B u = F on the free DOFs.
inline SolutionField solve_static(const Grid& g, const BlockSystem& sys, const Vector& F)
{
  if (F.size() != sys.size()) throw DomainError("solve_static: load vector size mismatch");
  LinearSolver solver(sys.B);
  return to_field(g, solver.solve(F));
}

struct Trajectory {
  std::vector<SolutionField> states; ///< states[0] is the initial value
  double dt = 0.0;

  const SolutionField& final_state() const { return states.back(); }
};

inline int time_steps(double dt, double t_final)
{
  if (!(dt > 0.0)) throw DomainError("time step must be positive");
  if (!(t_final >= dt * (1.0 - 1e-12))) throw DomainError("final time must be >= dt");
  return static_cast<int>(std::ceil(t_final / dt - 1e-9));
}

/**
 * @brief Backward Euler for C du/dt + B u = F.
 *
 * Each step solves (C/dt + B) u^{n+1} = C u^n / dt + F; the matrix is factored once.
 * The number of steps is ceil(T/dt), so the last state sits at time steps*dt.
 */
inline Trajectory solve_dynamic(const Grid& g, const BlockSystem& sys, const Vector& F, const SolutionField& u0, double dt, double t_final)
{
  if (F.size() != sys.size()) throw DomainError("solve_dynamic: load vector size mismatch");
  const int steps = time_steps(dt, t_final);
  const SparseMatrix C_dt = sys.C / dt;
  const LinearSolver solver(SparseMatrix(C_dt + sys.B));

  Trajectory tr;
  tr.dt = dt;
  tr.states.reserve(steps + 1);
  Vector u = to_free(g, u0);
  tr.states.push_back(to_field(g, u));
  for (int n = 1; n <= steps; ++n) {
    const Vector rhs = C_dt * u + F;
    u = rhs.norm() == 0.0 ? Vector::Zero(u.size()) : solver.solve(rhs);
    auto s = to_field(g, u);
    s.time = n * dt;
    tr.states.push_back(std::move(s));
  }
  return tr;
}

} // namespace dcgms
