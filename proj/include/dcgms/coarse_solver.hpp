#pragma once

/** @file coarse_solver.hpp
    @brief Galerkin projection onto the multiscale space, coarse solves and downscaling.
*/

#include "assembly.hpp"
#include "errors.hpp"
#include "fine_solver.hpp"
#include "msbasis.hpp"

#include <Eigen/SparseCholesky>

#include <vector>

#include <fmt/format.h>

namespace dcgms {

struct CoarseSystem {
  SparseMatrix B; ///< R^T B R
  SparseMatrix C; ///< R^T C R
  Vector F;       ///< R^T F

  int dim() const { return static_cast<int>(B.rows()); }
};

inline CoarseSystem project_system(const BlockSystem& sys, const SparseMatrix& R, const Vector& F)
{
  if (R.rows() != sys.size()) throw DomainError(fmt::format("project_system: prolongation has {} rows, system has {}", R.rows(), sys.size()));
  if (F.size() != sys.size()) throw DomainError("project_system: load vector size mismatch");
  const SparseMatrix Rt = R.transpose();
  CoarseSystem cs;
  cs.B = Rt * (sys.B * R);
  cs.C = Rt * (sys.C * R);
  cs.F = Rt * F;

  Eigen::SimplicialLDLT<SparseMatrix> ldlt(cs.C);
  if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0.0).any())
    throw SolverError("project_system: coarse mass matrix is rank deficient (duplicate or dependent basis columns?)");
  return cs;
}

inline CoarseSystem project_system(const BlockSystem& sys, const MultiscaleSpace& space, const Vector& F)
{
  return project_system(sys, space.R, F);
}

inline Vector solve_ms_static(const CoarseSystem& cs)
{
  if (cs.F.norm() == 0.0) return Vector::Zero(cs.dim());
  const LinearSolver solver(cs.B);
  return solver.solve(cs.F);
}

/// Coefficients of the c-orthogonal projection of a fine state: C_c u_c = R^T C u.
inline Vector c_projection(const BlockSystem& sys, const SparseMatrix& R, const CoarseSystem& cs, const Vector& u_free)
{
  const Vector rhs = R.transpose() * (sys.C * u_free);
  if (rhs.norm() == 0.0) return Vector::Zero(cs.dim());
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(cs.C);
  if (ldlt.info() != Eigen::Success) throw SolverError("c_projection: coarse mass factorization failed");
  return ldlt.solve(rhs);
}

struct CoarseTrajectory {
  std::vector<Vector> states; ///< states[0] is the projected initial value
  double dt = 0.0;
};

/// Backward Euler on the coarse system starting from coefficients uc0.
inline CoarseTrajectory solve_ms_dynamic(const CoarseSystem& cs, const Vector& uc0, double dt, double t_final)
{
  if (uc0.size() != cs.dim()) throw DomainError("solve_ms_dynamic: initial coefficient size mismatch");
  const int steps = time_steps(dt, t_final);
  const SparseMatrix C_dt = cs.C / dt;
  const LinearSolver solver(SparseMatrix(C_dt + cs.B));

  CoarseTrajectory tr;
  tr.dt = dt;
  tr.states.reserve(steps + 1);
  tr.states.push_back(uc0);
  Vector u = uc0;
  for (int n = 1; n <= steps; ++n) {
    const Vector rhs = C_dt * u + cs.F;
    u = rhs.norm() == 0.0 ? Vector::Zero(u.size()) : solver.solve(rhs);
    tr.states.push_back(u);
  }
  return tr;
}

/// Fine nodal pair R u_c, with zeros on the Dirichlet nodes.
inline SolutionField downscale(const Grid& g, const SparseMatrix& R, const Vector& uc)
{
  if (uc.size() != R.cols()) throw DomainError(fmt::format("downscale: expected {} coefficients, got {}", R.cols(), uc.size()));
  return to_field(g, R * uc);
}

inline SolutionField downscale(const Grid& g, const MultiscaleSpace& space, const Vector& uc)
{
  return downscale(g, space.R, uc);
}

} // namespace dcgms
