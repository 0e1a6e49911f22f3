// Command-line driver: run, sweep, validate, oracle-check, bands.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "markovgap/pipeline.hpp"

using namespace markovgap;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool force = false;
  int jobs = 1;
  std::string key;
  std::string values;
  bool values_given = false;
  Index grid = 0;
  int states = 50;
};

RunConfig load(const Flags& f) {
  RunConfig cfg = load_config(f.config);
  if (f.seed) cfg.optimizer.rng_seed = *f.seed;
  if (f.out) cfg.out_dir = *f.out;
  return cfg;
}

void print_dimension(const RunConfig& cfg) {
  const Problem p = build_problem(cfg);
  std::cerr << "estimated matrix dimension: " << p.estimated_dim() << " (max_dim " << cfg.max_dim << ")\n";
}

int cmd_run(const Flags& f) {
  const RunConfig cfg = load(f);
  print_dimension(cfg);
  RunOptions opt;
  opt.force = f.force;
  const RunReport r = run(cfg, opt);
  std::printf("bare_h          %.10f  (%.6f log 2)\n", r.bare_h, r.bare_h / std::numbers::ln2);
  std::printf("final_h         %.10f  (%.6f log 2)\n", r.final_h, r.final_h / std::numbers::ln2);
  std::printf("c_plus_estimate %.6f\n", r.c_plus_estimate);
  std::printf("iterations      %ld  converged %s  (%s)\n", static_cast<long>(r.optimization.iterations),
              r.converged() ? "yes" : "no", r.optimization.stop_reason.c_str());
  std::printf("report          %s\n", r.report_path.c_str());
  return r.converged() ? exit_ok : exit_not_converged;
}

int cmd_sweep(const Flags& f) {
  const RunConfig cfg = load(f);
  const std::string key = f.key.empty() ? cfg.sweep_key : f.key;
  if (key.empty()) throw ConfigError("sweep: no key (use --key or [sweep] key)");
  const std::vector<std::string> values = f.values_given ? detail::split_list(f.values) : cfg.sweep_values;
  RunOptions opt;
  opt.force = f.force;
  const auto rows = sweep(cfg, key, values, f.jobs, opt);
  std::filesystem::create_directories(cfg.out_dir);
  const std::string path = (std::filesystem::path(cfg.out_dir) / (cfg.name + "_sweep_" + key + ".csv")).string();
  std::ofstream out(path);
  write_sweep_csv(out, key, rows);
  write_sweep_csv(std::cout, key, rows);
  std::cerr << "sweep table: " << path << '\n';
  return exit_ok;
}

int cmd_validate(const Flags& f) {
  const Diagnostics d = validate(load(f));
  for (const auto& c : d.checks) std::printf("%-14s %s  %s\n", c.name.c_str(), c.passed ? "pass" : "FAIL", c.message.c_str());
  return d.passed() ? exit_ok : exit_failure;
}

int cmd_oracle(const Flags& f) {
  const OracleCheckResult r = oracle_check(f.seed.value_or(1), f.states);
  std::printf("states                %d\n", r.states);
  std::printf("max |dS|              %.3e\n", r.max_err_entropy);
  std::printf("max |dI|              %.3e\n", r.max_err_mutual_information);
  std::printf("max |dS_R|            %.3e\n", r.max_err_reflected);
  std::printf("max |dh|              %.3e\n", r.max_err_markov_gap);
  std::printf("gaussian vs dense     %s (tolerance %.0e)\n", r.gaussian_passed() ? "pass" : "FAIL", r.tolerance);
  std::printf("toric-code h          %.3e %s\n", r.toric_h, r.toric_passed() ? "pass" : "FAIL");
  return r.passed() ? exit_ok : exit_failure;
}

int cmd_bands(const Flags& f) {
  const RunConfig cfg = load(f);
  cfg.validate();
  std::filesystem::create_directories(cfg.out_dir);
  const std::string path = (std::filesystem::path(cfg.out_dir) / (cfg.name + "_bands.csv")).string();
  std::ofstream out(path);
  write_bands_csv(out, cfg.model(), f.grid, cfg.lattice());
  std::cerr << "bands: " << path << '\n';
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Markov gap of free-fermion lattice ground states"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Flags f;

  auto add_config = [&](CLI::App* sub) { sub->add_option("--config", f.config, "INI config file")->required()->check(CLI::ExistingFile); };
  auto add_seed = [&](CLI::App* sub) { sub->add_option("--seed", f.seed, "RNG seed (overrides [run] seed)"); };
  auto add_out = [&](CLI::App* sub) { sub->add_option("--out", f.out, "output directory (overrides [output] dir)"); };

  auto* run_cmd = app.add_subcommand("run", "bare and optimized Markov gap for one config");
  add_config(run_cmd);
  add_seed(run_cmd);
  add_out(run_cmd);
  run_cmd->add_flag("--force", f.force, "allow runs above max_dim");

  auto* sweep_cmd = app.add_subcommand("sweep", "one run per value of R, L_A or shape");
  add_config(sweep_cmd);
  add_seed(sweep_cmd);
  add_out(sweep_cmd);
  sweep_cmd->add_flag("--force", f.force, "allow runs above max_dim");
  sweep_cmd->add_option("--jobs", f.jobs, "concurrent rows")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--key", f.key, "R, L_A or shape (overrides [sweep] key)");
  sweep_cmd->add_option("--values", f.values, "comma-separated values (overrides [sweep] values)");

  auto* validate_cmd = app.add_subcommand("validate", "purity, Chern, geometry and time-reversal checks");
  add_config(validate_cmd);

  auto* oracle_cmd = app.add_subcommand("oracle-check", "Gaussian formalism against dense many-body states");
  add_seed(oracle_cmd);
  oracle_cmd->add_option("--states", f.states, "number of random states")->check(CLI::PositiveNumber);

  auto* bands_cmd = app.add_subcommand("bands", "band-structure CSV");
  add_config(bands_cmd);
  add_out(bands_cmd);
  bands_cmd->add_option("--grid", f.grid, "k-grid size (default: the lattice momenta)")->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_config;
  }
  f.values_given = sweep_cmd->count("--values") > 0;

  try {
    if (*run_cmd) return cmd_run(f);
    if (*sweep_cmd) return cmd_sweep(f);
    if (*validate_cmd) return cmd_validate(f);
    if (*oracle_cmd) return cmd_oracle(f);
    if (*bands_cmd) return cmd_bands(f);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return exit_config;
}
