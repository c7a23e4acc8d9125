#pragma once

/** @file metrics.hpp
    @brief Weighted error norms, error reports and numerical checks of the coercivity bounds.

    Norms are the square roots of the weighted integrals:
      ||u||_{L2,kappa} = (int kappa u^2)^(1/2),  ||u||_{H1,kappa} = (int kappa |grad u|^2)^(1/2).
*/

#include "assembly.hpp"
#include "coeffs.hpp"
#include "errors.hpp"
#include "fine_solver.hpp"
#include "msbasis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

namespace dcgms {

/// Poincare constant of the unit square, 1 / (sqrt(2) pi).
inline constexpr double poincare_unit_square = 1.0 / (std::numbers::sqrt2 * std::numbers::pi);

struct ErrorRow {
  int dim_vms = 0;
  std::string mode;
  std::string q_scenario;
  double h1_u1 = 0.0, l2_u1 = 0.0, h1_u2 = 0.0, l2_u2 = 0.0; ///< percent
  double lambda = std::numeric_limits<double>::infinity();
};

/// kappa-weighted stiffness and mass matrices on all fine nodes, one pair per continuum.
class WeightedNorms {
public:
  WeightedNorms(const Grid& g, const FieldSet& fs)
  {
    fs.check_bound_to(g);
    stiff_[0] = assemble_stiffness(g, fs.kappa1);
    stiff_[1] = assemble_stiffness(g, fs.kappa2);
    mass_[0] = assemble_weighted_mass(g, fs.kappa1);
    mass_[1] = assemble_weighted_mass(g, fs.kappa2);
  }

  double h1(int continuum, const Vector& u) const { return std::sqrt(std::max(0.0, u.dot(stiff_[continuum] * u))); }
  double l2(int continuum, const Vector& u) const { return std::sqrt(std::max(0.0, u.dot(mass_[continuum] * u))); }

private:
  std::array<SparseMatrix, 2> stiff_, mass_;
};

/// Relative errors of u_ms against u_h in percent, per continuum.
inline ErrorRow weighted_errors(const WeightedNorms& norms, const SolutionField& u_ms, const SolutionField& u_h)
{
  if (u_ms.u1.size() != u_h.u1.size() || u_ms.u2.size() != u_h.u2.size()) throw DomainError("weighted_errors: solutions live on different grids");
  ErrorRow row;
  const std::array<const Vector*, 2> ms{&u_ms.u1, &u_ms.u2}, ref{&u_h.u1, &u_h.u2};
  std::array<double, 2> h1{}, l2{};
  for (int i = 0; i < 2; ++i) {
    const double dh = norms.h1(i, *ref[i]), dl = norms.l2(i, *ref[i]);
    if (dh == 0.0 || dl == 0.0) throw DomainError(fmt::format("weighted_errors: reference solution of continuum {} is zero", i + 1));
    const Vector diff = *ms[i] - *ref[i];
    h1[i] = 100.0 * norms.h1(i, diff) / dh;
    l2[i] = 100.0 * norms.l2(i, diff) / dl;
  }
  row.h1_u1 = h1[0];
  row.l2_u1 = l2[0];
  row.h1_u2 = h1[1];
  row.l2_u2 = l2[1];
  return row;
}

inline ErrorRow weighted_errors(const Grid& g, const FieldSet& fs, const SolutionField& u_ms, const SolutionField& u_h)
{
  return weighted_errors(WeightedNorms(g, fs), u_ms, u_h);
}

inline constexpr const char* error_csv_header = "dim_vms,mode,q_scenario,h1_err_u1,l2_err_u1,h1_err_u2,l2_err_u2,lambda";

inline std::string format_lambda(double lambda)
{
  return std::isinf(lambda) ? std::string("inf") : fmt::format("{:.6e}", lambda);
}

inline std::string to_csv_line(const ErrorRow& r)
{
  return fmt::format("{},{},{},{:.3f},{:.3f},{:.3f},{:.3f},{}", r.dim_vms, r.mode, r.q_scenario, r.h1_u1, r.l2_u1, r.h1_u2, r.l2_u2,
                     format_lambda(r.lambda));
}

/// min over neighborhoods (and continua, uncoupled) of lambda_{L_j+1}; +inf once L_j exhausts every spectrum.
inline double lambda_report(const OfflineBasis& off, std::span<const int> L)
{
  if (L.size() != off.spectra.size()) throw DomainError("lambda_report: need one L per neighborhood");
  return spectral_tail(off.spectra, L);
}

inline double lambda_report(const std::vector<std::vector<SpectralSelection>>& spectra, std::span<const int> L)
{
  return spectral_tail(spectra, L);
}

// ---------------------------------------------------------------------------
// Inequality checks
// ---------------------------------------------------------------------------

/// Coefficient bounds entering the coercivity constants.
struct CoefficientBounds {
  double kappa_min = 0.0;
  double b_max = 0.0;  ///< max |b_i| (Euclidean), both continua
  double q_max = 0.0;  ///< max |Q_i|, both continua
  double qs_max = 0.0; ///< max |Q_s|
};

inline CoefficientBounds coefficient_bounds(const FieldSet& fs)
{
  CoefficientBounds cb;
  cb.kappa_min = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < fs.size(); ++c) {
    cb.kappa_min = std::min({cb.kappa_min, fs.kappa1[c], fs.kappa2[c]});
    cb.b_max = std::max({cb.b_max, std::hypot(fs.b1[c][0], fs.b1[c][1]), std::hypot(fs.b2[c][0], fs.b2[c][1])});
    cb.q_max = std::max({cb.q_max, std::abs(fs.q1[c]), std::abs(fs.q2[c])});
    cb.qs_max = std::max(cb.qs_max, std::abs(0.5 * (fs.q1[c] + fs.q2[c])));
  }
  return cb;
}

/**
 * @brief Rescales b_1, b_2 and Q_1, Q_2 so that b_max / sqrt(kappa_min) = ratio and
 *        2 max|Q_s| C_p^2 / kappa_min = ratio; kappa and c are unchanged.
 */
inline FieldSet coercive_scaling(FieldSet fs, double ratio = 0.5)
{
  if (!(ratio > 0.0 && ratio < 1.0)) throw DomainError("coercive_scaling: ratio must lie in (0, 1)");
  const auto cb = coefficient_bounds(fs);
  if (cb.b_max > 0.0) {
    const double sb = ratio * std::sqrt(cb.kappa_min) / cb.b_max;
    for (auto* b : {&fs.b1, &fs.b2})
      for (auto& v : *b) v = {v[0] * sb, v[1] * sb};
  }
  if (cb.qs_max > 0.0) {
    const double sq = ratio * cb.kappa_min / (2.0 * cb.qs_max * poincare_unit_square * poincare_unit_square);
    for (auto* q : {&fs.q1, &fs.q2})
      for (auto& v : *q) v *= sq;
  }
  return fs;
}

struct GardingReport {
  bool precondition = false; ///< b_max / sqrt(kappa_min) < 1
  bool pass = false;
  double K = 0.0, alpha = 0.0, C_b = 0.0;
  double min_margin = std::numeric_limits<double>::infinity();      ///< min of b(u,u) + K|u|^2 - alpha|u|_a^2, normalized
  double max_bound_ratio = 0.0;                                     ///< max of b(u,v) / (C_b |u|_a |v|_a)
  int samples = 0;
  std::string message;
};

namespace detail {

inline Vector random_vector(std::mt19937_64& rng, Eigen::Index n)
{
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Vector v(n);
  for (Eigen::Index k = 0; k < n; ++k) v[k] = dist(rng);
  return v;
}

} // namespace detail

/**
 * @brief Samples the Garding inequality b(u,u) + K |u|_{L2}^2 >= alpha |u|_a^2 and the bound
 *        b(u,v) <= C_b |u|_a |v|_a with
 *
 *   K = b/sqrt(kmin) + 2Q,  alpha = 1 - b/sqrt(kmin),  C_b = 1 + 2 b C_p / kmin + 2 Q C_p^2 / kmin.
 *
 * Margins are normalized by the size of the terms (|b(u,u)| + K|u|^2 + alpha|u|_a^2) and the
 * check passes when every normalized margin is >= -1e-10. Extra directions (e.g. adversarial
 * vectors) can be appended to the random samples.
 */
inline GardingReport check_garding(const BlockSystem& sys, const FieldSet& fs, int samples, std::uint64_t seed,
                                   std::span<const Vector> extra = {})
{
  GardingReport rep;
  const auto cb = coefficient_bounds(fs);
  const double ratio = cb.b_max / std::sqrt(cb.kappa_min);
  rep.K = ratio + 2.0 * cb.q_max;
  rep.alpha = 1.0 - ratio;
  rep.C_b = 1.0 + 2.0 * cb.b_max * poincare_unit_square / cb.kappa_min + 2.0 * cb.q_max * poincare_unit_square * poincare_unit_square / cb.kappa_min;
  rep.precondition = ratio < 1.0;
  if (!rep.precondition) {
    rep.message = fmt::format("precondition violated: b_max/sqrt(kappa_min) = {:.4g} >= 1", ratio);
    return rep;
  }

  std::mt19937_64 rng(seed);
  std::vector<Vector> us;
  for (int s = 0; s < samples; ++s) us.push_back(detail::random_vector(rng, sys.size()));
  for (const auto& e : extra) us.push_back(e);

  rep.pass = true;
  for (std::size_t s = 0; s < us.size(); ++s) {
    const Vector& u = us[s];
    const double buu = u.dot(sys.B * u);
    const double l2 = u.dot(sys.L2 * u);
    const double a = u.dot(sys.A * u);
    const double scale = std::abs(buu) + rep.K * l2 + rep.alpha * a;
    const double margin = (buu + rep.K * l2 - rep.alpha * a) / scale;
    rep.min_margin = std::min(rep.min_margin, margin);

    const Vector v = detail::random_vector(rng, sys.size());
    const double buv = u.dot(sys.B.transpose() * v);
    const double bound = rep.C_b * std::sqrt(a) * std::sqrt(v.dot(sys.A * v));
    rep.max_bound_ratio = std::max(rep.max_bound_ratio, std::abs(buv) / bound);
  }
  rep.samples = static_cast<int>(us.size());
  rep.pass = rep.min_margin >= -1e-10 && rep.max_bound_ratio <= 1.0 + 1e-10;
  return rep;
}

struct NormEquivalenceReport {
  bool precondition = false; ///< 1 - 2 Qs C_p^2 / kmin > 0
  bool pass = false;
  double m1 = 0.0, m2 = 0.0;
  double min_lower_margin = std::numeric_limits<double>::infinity(); ///< min of (a_Qs - m1 a) / a
  double min_upper_margin = std::numeric_limits<double>::infinity(); ///< min of (m2 a - a_Qs) / a
  int samples = 0;
  std::string message;
};

/// Samples m1 a(u,u) <= a_Qs(u,u) <= m2 a(u,u) with m1,2 = 1 -/+ 2 max|Q_s| C_p^2 / kappa_min.
inline NormEquivalenceReport check_norm_equivalence(const BlockSystem& sys, const FieldSet& fs, int samples, std::uint64_t seed)
{
  NormEquivalenceReport rep;
  const auto cb = coefficient_bounds(fs);
  const double delta = 2.0 * cb.qs_max * poincare_unit_square * poincare_unit_square / cb.kappa_min;
  rep.m1 = 1.0 - delta;
  rep.m2 = 1.0 + delta;
  rep.precondition = rep.m1 > 0.0;
  if (!rep.precondition) {
    rep.message = fmt::format("precondition violated: 1 - 2 Qs C_p^2 / kappa_min = {:.4g} <= 0", rep.m1);
    return rep;
  }
  std::mt19937_64 rng(seed);
  for (int s = 0; s < samples; ++s) {
    const Vector u = detail::random_vector(rng, sys.size());
    const double a = u.dot(sys.A * u);
    const double aq = u.dot(sys.AQs * u);
    rep.min_lower_margin = std::min(rep.min_lower_margin, (aq - rep.m1 * a) / a);
    rep.min_upper_margin = std::min(rep.min_upper_margin, (rep.m2 * a - aq) / a);
  }
  rep.samples = samples;
  rep.pass = rep.min_lower_margin >= -1e-10 && rep.min_upper_margin >= -1e-10;
  return rep;
}

} // namespace dcgms
