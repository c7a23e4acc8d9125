#pragma once

/** @file io.hpp
    @brief Text formats: key=value configs, nodal CSV, legacy VTK and basis export.
*/

#include "coarse_solver.hpp"
#include "coeffs.hpp"
#include "errors.hpp"
#include "fine_solver.hpp"
#include "grid.hpp"
#include "msbasis.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

namespace dcgms {

/**
 * @brief Run configuration.
 *
 * Flat `key = value` lines; `#` starts a comment. Recognized keys: nc, nf, dt, t_final,
 * f1, f2, field_dir, q_scenario, problem (static|dynamic), threads.
 */
struct Config {
  int nc = 16;
  int nf = 8;
  double dt = 0.05;
  double t_final = 1.0;
  double f1 = 1.0;
  double f2 = 1.0;
  std::string field_dir;                ///< empty: generate the reference preset fields in memory
  std::optional<QScenario> q_scenario; ///< overrides q1/q2 from field_dir when set
  std::string problem = "dynamic";
  int threads = 0;
};

namespace detail {

inline std::string trim(const std::string& s)
{
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& v, const std::string& where)
{
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(d)) throw ParseError(where + ": expected a finite number, got '" + v + "'");
  return d;
}

inline int parse_int(const std::string& v, const std::string& where)
{
  int i = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), i);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) throw ParseError(where + ": expected an integer, got '" + v + "'");
  return i;
}

} // namespace detail

inline Config parse_config(std::istream& in, const std::string& name = "config")
{
  Config cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = fmt::format("{}:{}", name, lineno);
    if (eq == std::string::npos) throw ParseError(where + ": expected key=value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key == "nc") cfg.nc = detail::parse_int(value, where);
    else if (key == "nf") cfg.nf = detail::parse_int(value, where);
    else if (key == "dt") cfg.dt = detail::parse_double(value, where);
    else if (key == "t_final") cfg.t_final = detail::parse_double(value, where);
    else if (key == "f1") cfg.f1 = detail::parse_double(value, where);
    else if (key == "f2") cfg.f2 = detail::parse_double(value, where);
    else if (key == "field_dir") cfg.field_dir = value;
    else if (key == "q_scenario") cfg.q_scenario = parse_q_scenario(value);
    else if (key == "problem") {
      if (value != "static" && value != "dynamic") throw ParseError(where + ": problem must be static or dynamic");
      cfg.problem = value;
    }
    else if (key == "threads") cfg.threads = detail::parse_int(value, where);
    else throw ParseError(where + ": unknown key '" + key + "'");
  }
  return cfg;
}

inline Config load_config(const std::string& path)
{
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  auto cfg = parse_config(in, path);
  // relative field directories are resolved against the config file's location
  if (!cfg.field_dir.empty() && std::filesystem::path(cfg.field_dir).is_relative())
    cfg.field_dir = (std::filesystem::path(path).parent_path() / cfg.field_dir).lexically_normal().string();
  return cfg;
}

/// Names of the files written by gen-fields and read through field_dir.
struct FieldFiles {
  static constexpr const char* kappa1 = "kappa1.csv";
  static constexpr const char* kappa2 = "kappa2.csv";
  static constexpr const char* q1 = "q1.csv";
  static constexpr const char* q2 = "q2.csv";
  static constexpr const char* b1x = "b1x.csv";
  static constexpr const char* b1y = "b1y.csv";
  static constexpr const char* b2x = "b2x.csv";
  static constexpr const char* b2y = "b2y.csv";
  static constexpr const char* c11 = "c11.csv"; ///< optional, defaults to 1
  static constexpr const char* c22 = "c22.csv"; ///< optional, defaults to 1
};

inline void write_field_set(const std::string& dir, const FieldSet& fs)
{
  std::filesystem::create_directories(dir);
  const std::filesystem::path d(dir);
  write_scalar_field((d / FieldFiles::kappa1).string(), fs.kappa1, fs.cells);
  write_scalar_field((d / FieldFiles::kappa2).string(), fs.kappa2, fs.cells);
  write_scalar_field((d / FieldFiles::q1).string(), fs.q1, fs.cells);
  write_scalar_field((d / FieldFiles::q2).string(), fs.q2, fs.cells);
  write_vector_field((d / FieldFiles::b1x).string(), (d / FieldFiles::b1y).string(), fs.b1, fs.cells);
  write_vector_field((d / FieldFiles::b2x).string(), (d / FieldFiles::b2y).string(), fs.b2, fs.cells);
}

inline FieldSet load_field_set(const std::string& dir, int cells)
{
  const std::filesystem::path d(dir);
  auto path = [&d](const char* f) { return (d / f).string(); };
  FieldSet fs = FieldSet::constant(cells);
  fs.kappa1 = load_scalar_field(path(FieldFiles::kappa1), cells);
  fs.kappa2 = load_scalar_field(path(FieldFiles::kappa2), cells);
  fs.q1 = load_scalar_field(path(FieldFiles::q1), cells);
  fs.q2 = load_scalar_field(path(FieldFiles::q2), cells);
  fs.b1 = load_vector_field(path(FieldFiles::b1x), path(FieldFiles::b1y), cells);
  fs.b2 = load_vector_field(path(FieldFiles::b2x), path(FieldFiles::b2y), cells);
  if (std::filesystem::exists(path(FieldFiles::c11))) fs.c11 = load_scalar_field(path(FieldFiles::c11), cells);
  if (std::filesystem::exists(path(FieldFiles::c22))) fs.c22 = load_scalar_field(path(FieldFiles::c22), cells);
  fs.validate();
  return fs;
}

/// One value per line, 17 significant digits.
inline void write_nodal_csv(const std::string& path, const Vector& v)
{
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (Eigen::Index k = 0; k < v.size(); ++k) out << fmt::format("{:.17g}\n", v[k]);
  if (!out) throw IoError("write failed for " + path);
}

/// Legacy VTK, ASCII STRUCTURED_POINTS, point data arrays u1 and u2.
inline void write_vtk(const std::string& path, const Grid& g, const SolutionField& s)
{
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  const int np = g.nodes_per_side();
  out << "# vtk DataFile Version 3.0\n"
      << "dual-continuum solution\n"
      << "ASCII\n"
      << "DATASET STRUCTURED_POINTS\n"
      << "DIMENSIONS " << np << ' ' << np << " 1\n"
      << "ORIGIN 0 0 0\n"
      << fmt::format("SPACING {:.17g} {:.17g} 1\n", g.h(), g.h()) << "POINT_DATA " << g.num_nodes() << '\n';
  for (const auto& [name, u] : {std::pair<const char*, const Vector*>{"u1", &s.u1}, {"u2", &s.u2}}) {
    out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (Eigen::Index k = 0; k < u->size(); ++k) out << fmt::format("{:.17g}\n", (*u)[k]);
  }
  if (!out) throw IoError("write failed for " + path);
}

/**
 * @brief Writes basis.csv (one row per fine node, continuum 1 nodes first, one column per
 *        basis function) and basis_meta.txt (mode, sizes, L_j, eigenvalues).
 */
inline void write_basis(const std::string& dir, const Grid& g, const MultiscaleSpace& space, const OfflineBasis& off)
{
  std::filesystem::create_directories(dir);
  const std::filesystem::path d(dir);
  {
    std::ofstream out(d / "basis.csv");
    if (!out) throw IoError("cannot write " + (d / "basis.csv").string());
    const DenseMatrix R(space.R);
    const int nn = g.num_nodes();
    std::string line;
    for (int i = 0; i < 2; ++i)
      for (int node = 0; node < nn; ++node) {
        const int f = g.free_index(node);
        line.clear();
        for (int c = 0; c < space.dim(); ++c) {
          if (c) line += ',';
          line += fmt::format("{:.17g}", f < 0 ? 0.0 : R(i * g.num_free() + f, c));
        }
        out << line << '\n';
      }
  }
  std::ofstream meta(d / "basis_meta.txt");
  if (!meta) throw IoError("cannot write " + (d / "basis_meta.txt").string());
  meta << "mode " << to_string(space.mode) << '\n'
       << "nc " << g.nc() << '\n'
       << "nf " << g.nf() << '\n'
       << "dim " << space.dim() << '\n'
       << "lambda " << (std::isinf(space.lambda) ? std::string("inf") : fmt::format("{:.17g}", space.lambda)) << '\n';
  meta << "L";
  for (int l : space.L) meta << ' ' << l;
  meta << '\n';
  for (std::size_t j = 0; j < off.spectra.size(); ++j)
    for (std::size_t i = 0; i < off.spectra[j].size(); ++i) {
      meta << "eigenvalues " << j << ' ' << i;
      for (double v : off.spectra[j][i].eigenvalues) meta << ' ' << fmt::format("{:.17g}", v);
      meta << '\n';
    }
}

} // namespace dcgms
