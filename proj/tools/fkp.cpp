// Command-line driver: one subcommand per experiment stage.
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "fractal_kp/config.hpp"
#include "fractal_kp/experiment.hpp"

namespace {

using Runner = std::function<std::string(const fkp::ExperimentConfig&, const std::filesystem::path&)>;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw fkp::Error(fmt::format("cannot read config {}", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Options {
  std::string config;
  std::string out;
  int jobs = 0;
  int level = -1;
  bool dry_run = false;
};

int run(const Runner& runner, const Options& opt) {
  try {
    fkp::ExperimentConfig cfg = fkp::parse_config(read_file(opt.config));
    if (opt.level >= 0) cfg.fractal.level = opt.level;
    if (opt.jobs > 0) cfg.jobs = opt.jobs;
    if (!opt.out.empty()) cfg.output = opt.out;
    fkp::validate_config(cfg);
    if (opt.dry_run) {
      std::cout << fmt::format("config ok (hash {})\n", fkp::config_hash(cfg));
      return 0;
    }
    std::cout << runner(cfg, cfg.output) << '\n';
    return 0;
  } catch (const fkp::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fractal-supported KP/KdV solutions from a nonlocal dbar problem"};
  app.require_subcommand(1);

  const std::map<std::string, std::pair<std::string, Runner>> commands{
      {"gen-set", {"write the fractal node set(s)", fkp::run_gen_set}},
      {"solve-chi", {"solve the finite nonlocal system at the config point", fkp::run_solve_chi}},
      {"solve-ieq", {"solve the Nystrom integral equation at the config point", fkp::run_solve_ieq}},
      {"kp-field", {"evaluate u on the configured grid", fkp::run_kp_field}},
      {"residual", {"field plus KP residual report (and refinement table)", fkp::run_residual}},
      {"kdv-probe", {"field plus KdV reduction diagnostics", fkp::run_kdv_probe}},
      {"spectrum-probe", {"Schrodinger spectrum of an x-slice vs fractal bands", fkp::run_spectrum_probe}},
      {"converge", {"level-convergence table", fkp::run_converge}},
  };

  Options opt;
  std::map<CLI::App*, Runner> runners;
  for (const auto& [name, entry] : commands) {
    CLI::App* sub = app.add_subcommand(name, entry.first);
    sub->add_option("--config", opt.config, "JSON config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out, "artifact directory (overrides config output)");
    sub->add_option("--jobs", opt.jobs, "worker threads (overrides config jobs)")->check(CLI::PositiveNumber);
    sub->add_option("--level", opt.level, "fractal level override")->check(CLI::NonNegativeNumber);
    sub->add_flag("--dry-run", opt.dry_run, "validate the config and stop");
    runners.emplace(sub, entry.second);
  }

  CLI11_PARSE(app, argc, argv);
  for (const auto& [sub, runner] : runners) {
    if (sub->parsed()) return run(runner, opt);
  }
  return 1;
}
