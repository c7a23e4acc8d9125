#pragma once

/** @file experiment.hpp
    @brief Problem setup from a config, the fine reference solve and the error-vs-basis sweep.
*/

#include "assembly.hpp"
#include "coarse_solver.hpp"
#include "coeffs.hpp"
#include "fine_solver.hpp"
#include "grid.hpp"
#include "io.hpp"
#include "metrics.hpp"
#include "msbasis.hpp"

#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace dcgms {

struct Problem {
  Config config;
  Grid grid;
  FieldSet fields;
  std::string q_tag; ///< q_scenario name, or "file" when Q comes from q1.csv/q2.csv

  bool dynamic() const { return config.problem == "dynamic"; }
};

/**
 * @brief Builds the grid and coefficient fields described by a config.
 *
 * Without field_dir the reference preset fields are generated in memory. A q_scenario key
 * regenerates Q_1, Q_2 from the presets at grid resolution.
 */
inline Problem make_problem(const Config& cfg)
{
  Problem pb{cfg, Grid(cfg.nc, cfg.nf), {}, "file"};
  const int cells = pb.grid.cells_per_side();
  if (cfg.field_dir.empty()) {
    const QScenario s = cfg.q_scenario.value_or(QScenario::pos_large);
    pb.fields = preset_fields(cells, s);
    pb.q_tag = to_string(s);
  }
  else {
    pb.fields = load_field_set(cfg.field_dir, cells);
    if (cfg.q_scenario) {
      std::tie(pb.fields.q1, pb.fields.q2) = scenario_q(cells, *cfg.q_scenario);
      pb.q_tag = to_string(*cfg.q_scenario);
    }
  }
  if (!(cfg.dt > 0.0) || !(cfg.t_final > 0.0)) throw DomainError("config: dt and t_final must be positive");
  return pb;
}

/// Fine reference solution at the final time (or the static solution).
inline SolutionField solve_reference(const Problem& pb, const BlockSystem& sys, const Vector& F)
{
  if (!pb.dynamic()) return solve_static(pb.grid, sys, F);
  SolutionField u0{Vector::Zero(pb.grid.num_nodes()), Vector::Zero(pb.grid.num_nodes()), 0.0};
  auto tr = solve_dynamic(pb.grid, sys, F, u0, pb.config.dt, pb.config.t_final);
  return tr.final_state();
}

/// Multiscale solution on a given space, downscaled to the fine grid. The zero initial value is projected.
inline SolutionField solve_multiscale(const Problem& pb, const BlockSystem& sys, const Vector& F, const MultiscaleSpace& space)
{
  const CoarseSystem cs = project_system(sys, space, F);
  if (!pb.dynamic()) return downscale(pb.grid, space, solve_ms_static(cs));
  const Vector uc0 = c_projection(sys, space.R, cs, Vector::Zero(sys.size()));
  const auto tr = solve_ms_dynamic(cs, uc0, pb.config.dt, pb.config.t_final);
  SolutionField s = downscale(pb.grid, space, tr.states.back());
  s.time = pb.config.dt * static_cast<double>(tr.states.size() - 1);
  return s;
}

/// Basis counts are per continuum for uncoupled runs; coupled runs use twice as many so dims match.
struct SweepRequest {
  std::vector<BasisMode> modes;
  std::vector<int> nbasis;
  bool match_dims = false; ///< --mode both: coupled uses 2L for each listed L
};

/**
 * @brief Runs the error sweep: one offline stage per mode, then one row per basis count.
 *
 * Rows are written to csv (header first) and flushed as soon as they are computed.
 */
inline std::vector<ErrorRow> run_experiment(const Problem& pb, const SweepRequest& req, std::ostream& csv, std::ostream* log = nullptr)
{
  if (req.nbasis.empty()) throw DomainError("experiment: empty basis-count list");
  if (req.modes.empty()) throw DomainError("experiment: no mode requested");
  for (int l : req.nbasis)
    if (l <= 0) throw DomainError(fmt::format("experiment: basis counts must be positive, got {}", l));

  const Grid& g = pb.grid;
  const BlockSystem sys = assemble_block_system(g, pb.fields);
  const Vector F = block_load(g, pb.config.f1, pb.config.f2);
  const SolutionField ref = solve_reference(pb, sys, F);
  const WeightedNorms norms(g, pb.fields);
  if (log) *log << fmt::format("DOF_fine={}\n", g.dof_fine_reported()) << std::flush;

  csv << error_csv_header << '\n' << std::flush;
  std::vector<ErrorRow> rows;
  for (BasisMode mode : req.modes) {
    const OfflineBasis off = build_offline(g, pb.fields, mode, pb.config.threads);
    for (int l : req.nbasis) {
      const int L = (req.match_dims && mode == BasisMode::coupled) ? 2 * l : l;
      const MultiscaleSpace space = assemble_ms_space(g, off, L);
      const SolutionField ums = solve_multiscale(pb, sys, F, space);
      ErrorRow row = weighted_errors(norms, ums, ref);
      row.dim_vms = space.dim();
      row.mode = to_string(mode);
      row.q_scenario = pb.q_tag;
      row.lambda = space.lambda;
      csv << to_csv_line(row) << '\n' << std::flush;
      if (log) *log << fmt::format("{} L={} dim={} H1(u1)={:.3f}%\n", row.mode, L, row.dim_vms, row.h1_u1) << std::flush;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

} // namespace dcgms
