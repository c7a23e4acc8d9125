#pragma once

/** @file coeffs.hpp
    @brief Cellwise coefficient fields of the dual-continuum system and their generators.

    Every field is piecewise constant on fine cells and stored row-major from the bottom
    row of cells: value(cx, cy) = data[cy * n + cx].
*/

#include "errors.hpp"
#include "grid.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <tuple>
#include <utility>
#include <string>
#include <vector>

#include <fmt/format.h>

namespace dcgms {

using Vec2 = std::array<double, 2>;
using CellField = std::vector<double>;
using CellVectorField = std::vector<Vec2>;

struct FieldSet {
  int cells = 0; ///< cells per side

  CellField kappa1, kappa2; ///< permeabilities, > 0
  CellField q1, q2;         ///< interaction coefficients, any sign
  CellField c11, c22;       ///< storage coefficients, > 0
  CellVectorField b1, b2;   ///< convection fields

  std::size_t size() const { return static_cast<std::size_t>(cells) * cells; }

  /// Constant fields on an n x n cell grid; the usual starting point for tests.
  static FieldSet constant(int cells, double kappa = 1.0, double q = 0.0, Vec2 b = {0.0, 0.0}, double c = 1.0)
  {
    FieldSet fs;
    fs.cells = cells;
    const auto n = fs.size();
    fs.kappa1.assign(n, kappa);
    fs.kappa2.assign(n, kappa);
    fs.q1.assign(n, q);
    fs.q2.assign(n, q);
    fs.c11.assign(n, c);
    fs.c22.assign(n, c);
    fs.b1.assign(n, b);
    fs.b2.assign(n, b);
    return fs;
  }

  void validate() const
  {
    const auto n = size();
    auto check_size = [n](const auto& f, const char* name) {
      if (f.size() != n)
        throw DomainError(fmt::format("field {} has {} entries, expected {}", name, f.size(), n));
    };
    check_size(kappa1, "kappa1");
    check_size(kappa2, "kappa2");
    check_size(q1, "q1");
    check_size(q2, "q2");
    check_size(c11, "c11");
    check_size(c22, "c22");
    check_size(b1, "b1");
    check_size(b2, "b2");
    auto positive = [](const CellField& f, const char* name) {
      for (double v : f)
        if (!(v > 0.0)) throw DomainError(fmt::format("field {} must be positive everywhere", name));
    };
    positive(kappa1, "kappa1");
    positive(kappa2, "kappa2");
    positive(c11, "c11");
    positive(c22, "c22");
  }

  void check_bound_to(const Grid& g) const
  {
    if (cells != g.cells_per_side())
      throw DomainError(fmt::format("field set has {} cells per side, grid has {}", cells, g.cells_per_side()));
    validate();
  }
};

/// Symmetric and antisymmetric parts of the convection and interaction coefficients.
struct DerivedFields {
  CellVectorField b_s, b_a;
  CellField q_s, q_a;
};

inline DerivedFields derived_fields(const FieldSet& fs)
{
  DerivedFields d;
  const auto n = fs.size();
  d.b_s.resize(n);
  d.b_a.resize(n);
  d.q_s.resize(n);
  d.q_a.resize(n);
  for (std::size_t c = 0; c < n; ++c) {
    for (int k = 0; k < 2; ++k) {
      d.b_s[c][k] = 0.5 * (fs.b1[c][k] + fs.b2[c][k]);
      d.b_a[c][k] = 0.5 * (fs.b1[c][k] - fs.b2[c][k]);
    }
    d.q_s[c] = 0.5 * (fs.q1[c] + fs.q2[c]);
    d.q_a[c] = 0.5 * (fs.q1[c] - fs.q2[c]);
  }
  return d;
}

// ---------------------------------------------------------------------------
// Channel fields
// ---------------------------------------------------------------------------

/**
 * @brief Cells of one of the four fixed channel layouts on an n x n cell grid.
 *
 * Positions are fractions of the domain rounded down to cells, f(a) = floor(a*n);
 * every channel is t = max(1, n/64) cells thick.
 *
 *  - A: four horizontal channels starting at rows f(1/8), f(3/8), f(5/8), f(7/8).
 *       Channels 0 and 2 span columns [f(1/8), f(7/8)), channels 1 and 3 span [f(1/4), n).
 *  - B: four vertical channels starting at columns f(1/8), f(3/8), f(5/8), f(7/8).
 *       Channels 0 and 2 span rows [f(1/8), f(7/8)), channels 1 and 3 span [0, f(3/4)).
 *  - C: four L-shaped inclusions anchored at (f(1/8)|f(5/8), f(1/8)|f(5/8)); each has a
 *       horizontal and a vertical leg of length f(1/4) starting at the anchor.
 *  - D: five horizontal bars of length f(1/4) anchored at (1/8,1/4), (5/8,1/4), (3/8,1/2),
 *       (1/8,3/4) and (5/8,3/4).
 */
inline std::vector<char> channel_mask(int n, char pattern)
{
  if (n < 1) throw DomainError("channel_mask: cells per side must be >= 1");
  std::vector<char> mask(static_cast<std::size_t>(n) * n, 0);
  const int t = std::max(1, n / 64);
  auto f = [n](double a) { return static_cast<int>(std::floor(a * n)); };
  auto fill = [&](int cx0, int cx1, int cy0, int cy1) {
    for (int cy = std::max(cy0, 0); cy < std::min(cy1, n); ++cy)
      for (int cx = std::max(cx0, 0); cx < std::min(cx1, n); ++cx) mask[cy * n + cx] = 1;
  };

  switch (pattern) {
  case 'A': {
    const double starts[] = {1.0 / 8, 3.0 / 8, 5.0 / 8, 7.0 / 8};
    for (int k = 0; k < 4; ++k) {
      const int y = f(starts[k]);
      if (k % 2 == 0) fill(f(1.0 / 8), f(7.0 / 8), y, y + t);
      else fill(f(1.0 / 4), n, y, y + t);
    }
    break;
  }
  case 'B': {
    const double starts[] = {1.0 / 8, 3.0 / 8, 5.0 / 8, 7.0 / 8};
    for (int k = 0; k < 4; ++k) {
      const int x = f(starts[k]);
      if (k % 2 == 0) fill(x, x + t, f(1.0 / 8), f(7.0 / 8));
      else fill(x, x + t, 0, f(3.0 / 4));
    }
    break;
  }
  case 'C': {
    const int len = f(1.0 / 4);
    for (double ay : {1.0 / 8, 5.0 / 8})
      for (double ax : {1.0 / 8, 5.0 / 8}) {
        const int x = f(ax), y = f(ay);
        fill(x, x + len, y, y + t);
        fill(x, x + t, y, y + len);
      }
    break;
  }
  case 'D': {
    const int len = f(1.0 / 4);
    const std::array<Vec2, 5> anchors{{{1.0 / 8, 1.0 / 4}, {5.0 / 8, 1.0 / 4}, {3.0 / 8, 1.0 / 2}, {1.0 / 8, 3.0 / 4}, {5.0 / 8, 3.0 / 4}}};
    for (const auto& a : anchors) {
      const int x = f(a[0]), y = f(a[1]);
      fill(x, x + len, y, y + t);
    }
    break;
  }
  default:
    throw DomainError(fmt::format("gen_channel_field: unknown pattern '{}' (expected A, B, C or D)", pattern));
  }
  return mask;
}

inline CellField gen_channel_field(int cells, double background, double channel_value, char pattern)
{
  const auto mask = channel_mask(cells, pattern);
  CellField out(mask.size());
  for (std::size_t c = 0; c < mask.size(); ++c) out[c] = mask[c] ? channel_value : background;
  return out;
}

enum class ConvectionPreset { b1, b2 };

/// Convection field of the reference experiments, evaluated at cell centers.
inline CellVectorField eval_convection_preset(int cells, ConvectionPreset which)
{
  constexpr double two_pi = 2.0 * std::numbers::pi;
  CellVectorField out(static_cast<std::size_t>(cells) * cells);
  for (int cy = 0; cy < cells; ++cy)
    for (int cx = 0; cx < cells; ++cx) {
      const double x = (cx + 0.5) / cells, y = (cy + 0.5) / cells;
      const double p = 10.0 * (1.0 - std::cos(two_pi * x)) * std::sin(two_pi * y);
      const double m = -10.0 * std::sin(two_pi * x) * (1.0 - std::cos(two_pi * y));
      out[cy * cells + cx] = which == ConvectionPreset::b1 ? Vec2{p, m} : Vec2{m, p};
    }
  return out;
}

// ---------------------------------------------------------------------------
// Reference presets
// ---------------------------------------------------------------------------

enum class QScenario { pos_large, neg_mixed };

inline const char* to_string(QScenario s) { return s == QScenario::pos_large ? "pos_large" : "neg_mixed"; }

inline QScenario parse_q_scenario(const std::string& s)
{
  if (s == "pos_large") return QScenario::pos_large;
  if (s == "neg_mixed") return QScenario::neg_mixed;
  throw DomainError("unknown q_scenario '" + s + "' (expected pos_large or neg_mixed)");
}

/// Contrast values of the reference channel fields.
struct PresetValues {
  static constexpr double kappa1_channel = 1e4;
  static constexpr double kappa2_channel = 1e2;
  static constexpr double qhat_channel = 1e7;
  static constexpr double qtilde_channel = 10.0;
  static constexpr double background = 1.0;
};

inline CellField preset_kappa1(int cells) { return gen_channel_field(cells, PresetValues::background, PresetValues::kappa1_channel, 'A'); }
inline CellField preset_kappa2(int cells) { return gen_channel_field(cells, PresetValues::background, PresetValues::kappa2_channel, 'B'); }
inline CellField preset_qhat(int cells) { return gen_channel_field(cells, PresetValues::background, PresetValues::qhat_channel, 'C'); }
inline CellField preset_qtilde(int cells) { return gen_channel_field(cells, PresetValues::background, PresetValues::qtilde_channel, 'D'); }

/// Q1, Q2 for a scenario: pos_large gives Q1 = Q2 = Qhat, neg_mixed gives Q1 = -10 Qtilde, Q2 = -Qtilde.
inline std::pair<CellField, CellField> scenario_q(int cells, QScenario s)
{
  if (s == QScenario::pos_large) {
    auto q = preset_qhat(cells);
    return {q, q};
  }
  auto qt = preset_qtilde(cells);
  CellField q1(qt.size()), q2(qt.size());
  for (std::size_t c = 0; c < qt.size(); ++c) {
    q1[c] = -10.0 * qt[c];
    q2[c] = -qt[c];
  }
  return {q1, q2};
}

inline FieldSet preset_fields(int cells, QScenario s)
{
  auto fs = FieldSet::constant(cells);
  fs.kappa1 = preset_kappa1(cells);
  fs.kappa2 = preset_kappa2(cells);
  std::tie(fs.q1, fs.q2) = scenario_q(cells, s);
  fs.b1 = eval_convection_preset(cells, ConvectionPreset::b1);
  fs.b2 = eval_convection_preset(cells, ConvectionPreset::b2);
  return fs;
}

// ---------------------------------------------------------------------------
// CSV field I/O
// ---------------------------------------------------------------------------

/// Reads an n x n CSV of finite numbers; row 0 of the file is the bottom row of cells.
inline CellField load_scalar_field(const std::string& path, int cells)
{
  std::ifstream in(path);
  if (!in) throw IoError("cannot open field file " + path);

  CellField out;
  out.reserve(static_cast<std::size_t>(cells) * cells);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::stringstream ss(line);
    std::string tok;
    int cols = 0;
    while (std::getline(ss, tok, ',')) {
      const auto b = tok.find_first_not_of(" \t");
      const auto e = tok.find_last_not_of(" \t");
      const std::string t = b == std::string::npos ? std::string() : tok.substr(b, e - b + 1);
      char* end = nullptr;
      const double v = std::strtod(t.c_str(), &end);
      if (t.empty() || end != t.c_str() + t.size())
        throw ParseError(fmt::format("{}: row {}, column {}: cannot parse '{}'", path, rows, cols, t));
      if (!std::isfinite(v))
        throw ParseError(fmt::format("{}: row {}, column {}: non-finite value '{}'", path, rows, cols, t));
      out.push_back(v);
      ++cols;
    }
    if (cols != cells)
      throw IoError(fmt::format("{}: expected {}x{} values, row {} has {} columns", path, cells, cells, rows, cols));
    ++rows;
  }
  if (rows != cells) throw IoError(fmt::format("{}: expected {}x{} values, found {} rows", path, cells, cells, rows));
  return out;
}

inline void write_scalar_field(const std::string& path, const CellField& field, int cells)
{
  if (field.size() != static_cast<std::size_t>(cells) * cells) throw DomainError("write_scalar_field: size mismatch");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write field file " + path);
  for (int cy = 0; cy < cells; ++cy) {
    for (int cx = 0; cx < cells; ++cx) out << (cx ? "," : "") << fmt::format("{:.17g}", field[cy * cells + cx]);
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path);
}

inline CellVectorField load_vector_field(const std::string& path_x, const std::string& path_y, int cells)
{
  const auto x = load_scalar_field(path_x, cells);
  const auto y = load_scalar_field(path_y, cells);
  CellVectorField out(x.size());
  for (std::size_t c = 0; c < x.size(); ++c) out[c] = {x[c], y[c]};
  return out;
}

inline void write_vector_field(const std::string& path_x, const std::string& path_y, const CellVectorField& f, int cells)
{
  CellField x(f.size()), y(f.size());
  for (std::size_t c = 0; c < f.size(); ++c) {
    x[c] = f[c][0];
    y[c] = f[c][1];
  }
  write_scalar_field(path_x, x, cells);
  write_scalar_field(path_y, y, cells);
}

} // namespace dcgms
