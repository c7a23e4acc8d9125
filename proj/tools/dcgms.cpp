// Command-line pipeline: field generation, fine solves, basis export and error sweeps.
//
// Exit codes: 0 success, 1 solver failure, 2 I/O or parse error, 3 invalid arguments.

#include <dcgms/dcgms.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace dcgms;

namespace {

constexpr int exit_solver = 1;
constexpr int exit_io = 2;
constexpr int exit_args = 3;

std::vector<int> parse_int_list(const std::string& s)
{
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = detail::trim(tok);
    if (tok.empty()) continue;
    try {
      out.push_back(detail::parse_int(tok, "--nbasis-list"));
    }
    catch (const ParseError& e) {
      throw DomainError(e.what());
    }
  }
  return out;
}

void cmd_gen_fields(const std::string& preset, const std::string& pattern, int cells, const std::string& out, const std::string& scenario)
{
  if (cells <= 0) throw DomainError("--cells must be positive");
  FieldSet f;
  if (!pattern.empty()) {
    if (pattern.size() != 1) throw DomainError("--pattern must be one of A, B, C, D");
    // single-pattern field: kappa channels of 1e4 on a unit background, Q = 0, b = 0
    f = FieldSet::constant(cells);
    f.kappa1 = gen_channel_field(cells, PresetValues::background, PresetValues::kappa1_channel, pattern[0]);
    f.kappa2 = gen_channel_field(cells, PresetValues::background, PresetValues::kappa2_channel, pattern[0]);
  }
  else {
    if (preset != "paper") throw DomainError("--preset must be 'paper'");
    f = preset_fields(cells, parse_q_scenario(scenario));
  }
  write_field_set(out, f);
  if (pattern.empty()) {
    // the two interaction patterns the scenarios are built from
    write_scalar_field((fs::path(out) / "qhat.csv").string(), preset_qhat(cells), cells);
    write_scalar_field((fs::path(out) / "qtilde.csv").string(), preset_qtilde(cells), cells);
  }
  std::cout << fmt::format("wrote field files ({}x{} cells) to {}\n", cells, cells, out);
}

void cmd_solve_fine(const std::string& config, const std::string& out, const std::string& vtk, const std::string& dump)
{
  const Problem pb = make_problem(load_config(config));
  const BlockSystem sys = assemble_block_system(pb.grid, pb.fields);
  const Vector F = block_load(pb.grid, pb.config.f1, pb.config.f2);
  std::cout << fmt::format("DOF_fine={}\n", pb.grid.dof_fine_reported())
            << fmt::format("nodes={} free_dofs={}\n", pb.grid.num_nodes(), sys.size());
  const SolutionField u = solve_reference(pb, sys, F);
  fs::create_directories(out);
  write_nodal_csv((fs::path(out) / "u1.csv").string(), u.u1);
  write_nodal_csv((fs::path(out) / "u2.csv").string(), u.u2);
  if (!vtk.empty()) write_vtk(vtk, pb.grid, u);
  if (!dump.empty()) write_coo(dump, sys.B);
  std::cout << fmt::format("wrote {}/u1.csv, {}/u2.csv\n", out, out);
}

void cmd_build_basis(const std::string& config, const std::string& mode, int nbasis, const std::string& out)
{
  if (nbasis <= 0) throw DomainError("--nbasis must be positive");
  const Problem pb = make_problem(load_config(config));
  const OfflineBasis off = build_offline(pb.grid, pb.fields, parse_basis_mode(mode), pb.config.threads);
  const MultiscaleSpace space = assemble_ms_space(pb.grid, off, nbasis);
  write_basis(out, pb.grid, space, off);
  std::cout << fmt::format("dim={} lambda={}\n", space.dim(), format_lambda(space.lambda));
}

void cmd_experiment(const std::string& config, const std::string& mode, const std::string& list, const std::string& out)
{
  SweepRequest req;
  req.nbasis = parse_int_list(list);
  if (req.nbasis.empty()) throw DomainError("--nbasis-list is empty");
  if (mode == "both") {
    req.modes = {BasisMode::uncoupled, BasisMode::coupled};
    req.match_dims = true;
  }
  else
    req.modes = {parse_basis_mode(mode)};
  const Problem pb = make_problem(load_config(config));
  if (const auto parent = fs::path(out).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream csv(out);
  if (!csv) throw IoError("cannot write " + out);
  run_experiment(pb, req, csv, &std::cout);
  if (!csv) throw IoError("write failed for " + out);
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Fine FEM and GMsFEM for dual-continuum convection-reaction-diffusion"};
  app.require_subcommand(1);

  std::string preset = "paper", pattern, out_dir, scenario = "pos_large";
  int cells = 128;
  auto* gen = app.add_subcommand("gen-fields", "write coefficient field CSVs");
  gen->add_option("--preset", preset, "preset name (paper)");
  gen->add_option("--pattern", pattern, "single channel pattern A..D instead of the preset");
  gen->add_option("--cells", cells, "cells per side")->required();
  gen->add_option("--out", out_dir, "output directory")->required();
  gen->add_option("--q-scenario", scenario, "pos_large | neg_mixed");

  std::string config, sol_out = ".", vtk, dump;
  auto* fine = app.add_subcommand("solve-fine", "fine-scale reference solve");
  fine->add_option("--config", config, "config file")->required();
  fine->add_option("--out", sol_out, "output directory for u1.csv and u2.csv");
  fine->add_option("--vtk", vtk, "optional legacy VTK output file");
  fine->add_option("--dump-matrix", dump, "optional COO dump of the block operator");

  std::string mode = "coupled", list, errors_out = "errors.csv";
  auto* exp = app.add_subcommand("experiment", "error sweep over basis counts");
  exp->add_option("--config", config, "config file")->required();
  exp->add_option("--mode", mode, "coupled | uncoupled | both");
  exp->add_option("--nbasis-list", list, "comma separated basis counts per neighborhood")->required();
  exp->add_option("--out", errors_out, "error report CSV");

  int nbasis = 4;
  std::string basis_out = "basis";
  auto* basis = app.add_subcommand("build-basis", "build and export a multiscale basis");
  basis->add_option("--config", config, "config file")->required();
  basis->add_option("--mode", mode, "coupled | uncoupled");
  basis->add_option("--nbasis", nbasis, "basis functions per neighborhood (per continuum if uncoupled)");
  basis->add_option("--out", basis_out, "output directory");

  try {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_args;
  }

  try {
    if (gen->parsed()) cmd_gen_fields(preset, pattern, cells, out_dir, scenario);
    else if (fine->parsed()) cmd_solve_fine(config, sol_out, vtk, dump);
    else if (exp->parsed()) cmd_experiment(config, mode, list, errors_out);
    else if (basis->parsed()) cmd_build_basis(config, mode, nbasis, basis_out);
  }
  catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return exit_solver;
  }
  catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return exit_io;
  }
  catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return exit_io;
  }
  catch (const DomainError& e) {
    std::cerr << "argument error: " << e.what() << '\n';
    return exit_args;
  }
  return 0;
}
