#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bsde/config.hpp"
#include "bsde/errors.hpp"
#include "bsde/experiment.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  int threads = 0;
  std::optional<std::uint64_t> seed_override;
};

std::string resolve_out_dir(const CommonArgs& args, const bsde::ExperimentConfig& cfg) {
  if (!args.out_dir.empty()) return args.out_dir;
  if (const char* env = std::getenv("BSDELAB_OUT"); env && *env) return env;
  return cfg.out_dir;
}

bsde::ExperimentConfig load_config(const CommonArgs& args, bool strict,
                                   const bsde::ExperimentConfig& defaults) {
  bsde::ExperimentConfig cfg = defaults;
  if (!args.config_path.empty()) cfg = bsde::parse_config_file(args.config_path, strict);
  if (args.seed_override) cfg.seed = *args.seed_override;
  if (args.threads > 0) cfg.threads = args.threads;
  return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required) {
  auto* opt = cmd->add_option("--config", args.config_path, "experiment config (JSON)");
  if (config_required) opt->required();
  cmd->add_option("--out", args.out_dir, "output directory (overrides config and env)");
  cmd->add_option("--threads", args.threads, "worker threads for multi-n sweeps");
  cmd->add_option_function<std::uint64_t>(
      "--seed-override", [&args](const std::uint64_t& v) { args.seed_override = v; },
      "replace the config seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bsdelab: discrete BSDE solvers with random terminal times"};
  app.require_subcommand(1);

  CommonArgs run_args, verify_args, converge_args, oracle_args;
  auto* run_cmd = app.add_subcommand("run", "run the configured experiment");
  add_common(run_cmd, run_args, true);
  auto* verify_cmd = app.add_subcommand("verify", "run the structural invariant suite");
  add_common(verify_cmd, verify_args, false);
  auto* converge_cmd = app.add_subcommand("converge", "multi-n refinement sweep");
  add_common(converge_cmd, converge_args, true);
  auto* oracle_cmd = app.add_subcommand("oracle", "reference boundary-value solve only");
  add_common(oracle_cmd, oracle_args, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      const auto cfg = load_config(run_args, true, {});
      const auto files = bsde::run_experiment(cfg, resolve_out_dir(run_args, cfg));
      for (const auto& f : files) std::cout << "wrote " << f << "\n";
      return 0;
    }
    if (converge_cmd->parsed()) {
      auto cfg = load_config(converge_args, true, {});
      if (cfg.n_list.empty()) throw bsde::ConfigError("n_list", "must be nonempty");
      const std::string out_dir = resolve_out_dir(converge_args, cfg);
      std::filesystem::create_directories(out_dir);
      const auto report = bsde::run_convergence_study(cfg);
      bsde::write_convergence_csv(report, out_dir + "/converge.csv");
      bsde::write_convergence_json(report, out_dir + "/converge.json");
      std::cout << "wrote " << out_dir + "/converge.csv" << "\n";
      std::cout << "wrote " << out_dir + "/converge.json" << "\n";
      return 0;
    }
    if (oracle_cmd->parsed()) {
      auto cfg = load_config(oracle_args, true, {});
      cfg.scheme = "oracle-only";
      const auto files = bsde::run_experiment(cfg, resolve_out_dir(oracle_args, cfg));
      for (const auto& f : files) std::cout << "wrote " << f << "\n";
      return 0;
    }
    if (verify_cmd->parsed()) {
      bsde::ExperimentConfig defaults;
      defaults.generator = "linear:-1,0,1";
      defaults.terminal = "exp";
      const auto cfg = load_config(verify_args, false, defaults);
      const auto report = bsde::run_verify(cfg);
      for (const auto& check : report.checks) {
        std::printf("check %-32s residual=%-12.3e tol=%-9.1e %s\n", check.name.c_str(),
                    check.residual, check.tol, check.pass ? "PASS" : "FAIL");
      }
      return report.all_pass() ? 0 : 1;
    }
  } catch (const bsde::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const bsde::SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return kExitSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  }
  return 0;
}
