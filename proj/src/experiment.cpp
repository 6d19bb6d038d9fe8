#include "bsde/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>

#include <json.hpp>

#include "bsde/lsmc.hpp"
#include "bsde/picard.hpp"
#include "bsde/rng.hpp"

namespace bsde {
namespace {

using nlohmann::json;

double seconds_since(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  return out;
}

void write_json(const json& doc, const std::string& path) {
  auto out = open_out(path);
  out << doc.dump(2) << "\n";
}

}  // namespace

Problem make_problem(const ExperimentConfig& cfg) {
  return {make_generator(cfg.generator), make_terminal(cfg.terminal)};
}

StoppingRule rule_for(const ExperimentConfig& cfg, int n) {
  StoppingRule rule = make_lattice_rule(cfg.barrier_a, n, cfg.horizon_T, cfg.two_sided);
  if (cfg.barrier_an) rule.barrier_an = *cfg.barrier_an;
  return rule;
}

std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

void write_convergence_csv(const ConvergenceReport& report, const std::string& path) {
  auto out = open_out(path);
  out << "n,Y0_error,sup_node_error,z_l2_error,qv_residual,martingale_residual,runtime\n";
  for (const auto& row : report.rows) {
    out << row.n << ',' << format_double(row.Y0_error) << ',' << format_double(row.sup_node_error)
        << ',' << format_double(row.z_l2_error) << ',' << format_double(row.qv_residual) << ','
        << format_double(row.martingale_residual) << ',' << format_double(row.runtime) << "\n";
  }
}

void write_lattice_csv(const DiscreteSolution& sol, const Generator& gen,
                       const std::string& path) {
  const Eigen::VectorXd m = node_martingale_mean(sol, gen);
  auto out = open_out(path);
  out << "k,j,position,active,y,z,M\n";
  for (int k = 0; k <= sol.depth; ++k) {
    for (int j = sol.layout.j_lo(k); j <= sol.layout.j_hi(k); j += 2) {
      const Eigen::Index idx = sol.layout.index(k, j);
      out << k << ',' << j << ',' << format_double(lattice_position(j, sol.n())) << ','
          << (sol.kinds[idx] == NodeKind::Interior ? 1 : 0) << ',' << format_double(sol.y[idx])
          << ',' << format_double(sol.z[idx]) << ',' << format_double(m[idx]) << "\n";
    }
  }
}

void write_convergence_json(const ConvergenceReport& report, const std::string& path) {
  json rows = json::array();
  for (const auto& row : report.rows) {
    rows.push_back({{"n", row.n},
                    {"Y0_error", row.Y0_error},
                    {"sup_node_error", row.sup_node_error},
                    {"z_l2_error", row.z_l2_error},
                    {"qv_residual", row.qv_residual},
                    {"martingale_residual", row.martingale_residual},
                    {"runtime", row.runtime}});
  }
  write_json(rows, path);
}

ConvergenceReport run_convergence_study(const ExperimentConfig& cfg) {
  const Problem problem = make_problem(cfg);
  const ReferenceSolution ref =
      solve_bvp(problem.gen, [&](double x) { return problem.terminal(x, 0.0); }, cfg.barrier_a,
                cfg.bvp_grid_size);
  const double u0 = ref.eval(0.0);

  auto solve_row = [&](int n) {
    const auto start = std::chrono::steady_clock::now();
    const StoppingRule rule = rule_for(cfg, n);
    NodeSolveConfig node_cfg;
    node_cfg.fixed_point_tol = cfg.fixed_point_tol;
    node_cfg.max_iters = cfg.max_iters;
    const DiscreteSolution sol =
        backward_solve({n, cfg.horizon_T}, problem.gen, problem.terminal, rule, node_cfg);
    ConvergenceRow row;
    row.n = n;
    row.Y0_error = std::abs(sol.y0() - u0);
    row.sup_node_error = sup_node_error(sol, ref, cfg.sup_window_L);
    row.z_l2_error = z_l2_distance(sol, ref);
    row.qv_residual = qv_residual_metric(sol, problem.gen, cfg.path_count, cfg.seed);
    row.martingale_residual =
        martingale_residual_metric(sol, problem.gen, cfg.path_count, cfg.seed);
    row.runtime = seconds_since(start);
    return row;
  };

  ConvergenceReport report;
  if (cfg.threads > 1) {
    std::vector<std::future<ConvergenceRow>> futures;
    futures.reserve(cfg.n_list.size());
    for (const int n : cfg.n_list)
      futures.push_back(std::async(std::launch::async, solve_row, n));
    for (auto& f : futures) report.rows.push_back(f.get());  // deterministic merge order
  } else {
    for (const int n : cfg.n_list) report.rows.push_back(solve_row(n));
  }
  return report;
}

namespace {

std::vector<std::string> run_lattice(const ExperimentConfig& cfg, const std::string& out_dir) {
  const Problem problem = make_problem(cfg);
  std::vector<std::string> written;
  json summary = json::array();
  for (const int n : cfg.n_list) {
    const auto start = std::chrono::steady_clock::now();
    NodeSolveConfig node_cfg;
    node_cfg.fixed_point_tol = cfg.fixed_point_tol;
    node_cfg.max_iters = cfg.max_iters;
    const DiscreteSolution sol = backward_solve({n, cfg.horizon_T}, problem.gen,
                                                problem.terminal, rule_for(cfg, n), node_cfg);
    const std::string csv = out_dir + "/lattice_n" + std::to_string(n) + ".csv";
    write_lattice_csv(sol, problem.gen, csv);
    written.push_back(csv);
    summary.push_back({{"n", n},
                       {"y0", sol.y0()},
                       {"barrier_an", sol.rule.barrier_an},
                       {"depth", sol.depth},
                       {"runtime", seconds_since(start)}});
  }
  const std::string path = out_dir + "/summary.json";
  write_json(summary, path);
  written.push_back(path);
  return written;
}

std::vector<std::string> run_picard(const ExperimentConfig& cfg, const std::string& out_dir) {
  const Problem problem = make_problem(cfg);
  std::vector<std::string> written;
  auto out = open_out(out_dir + "/picard.csv");
  out << "n,iterations,converged,final_change,gap_to_direct\n";
  json summary = json::array();
  for (const int n : cfg.n_list) {
    const StoppingRule rule = rule_for(cfg, n);
    NodeSolveConfig node_cfg;
    node_cfg.fixed_point_tol = cfg.fixed_point_tol;
    node_cfg.max_iters = cfg.max_iters;
    const PicardResult result = picard_solve({n, cfg.horizon_T}, problem.gen, problem.terminal,
                                             rule, cfg.picard_p_max, cfg.picard_tol);
    const DiscreteSolution direct =
        backward_solve({n, cfg.horizon_T}, problem.gen, problem.terminal, rule, node_cfg);
    const double gap = picard_gap(result.iterate.values, direct);
    out << n << ',' << result.iterations_used << ',' << (result.converged ? 1 : 0) << ','
        << format_double(result.final_change) << ',' << format_double(gap) << "\n";
    summary.push_back({{"n", n},
                       {"iterations", result.iterations_used},
                       {"converged", result.converged},
                       {"final_change", result.final_change},
                       {"gap_to_direct", gap}});
  }
  written.push_back(out_dir + "/picard.csv");
  const std::string path = out_dir + "/summary.json";
  write_json(summary, path);
  written.push_back(path);
  return written;
}

std::vector<std::string> run_lsmc(const ExperimentConfig& cfg, const std::string& out_dir) {
  const Problem problem = make_problem(cfg);
  const Eigen::VectorXd times = uniform_subdivision(cfg.horizon_T, cfg.lsmc_mesh);
  const PathBatch batch = simulate_brownian_batch(times, cfg.path_count, cfg.seed);
  StoppingRule rule;
  rule.barrier_a = cfg.barrier_a;
  rule.barrier_an = cfg.barrier_an.value_or(cfg.barrier_a);
  rule.cap = cfg.horizon_T;
  rule.two_sided = cfg.two_sided;
  LsmcOptions opts;
  opts.node_cfg.fixed_point_tol = cfg.fixed_point_tol;
  opts.node_cfg.max_iters = cfg.max_iters;
  opts.store_y = cfg.lsmc_store_paths;
  opts.store_z = cfg.lsmc_store_paths;
  opts.store_dn = cfg.lsmc_store_paths;
  const McSolution sol =
      lsmc_solve(batch, rule, problem.gen, problem.terminal, make_basis(cfg.lsmc_basis), opts);
  double y0_stderr = 0.0;
  if (cfg.lsmc_bootstrap >= 2) {
    y0_stderr = lsmc_y0_bootstrap_stderr(batch, rule, problem.gen, problem.terminal,
                                         make_basis(cfg.lsmc_basis), cfg.lsmc_bootstrap,
                                         cfg.seed ^ 0xb007, opts);
  }

  std::vector<std::string> written;
  auto out = open_out(out_dir + "/lsmc_steps.csv");
  out << "step,time,orth_residual,proj_residual\n";
  for (int k = 0; k < sol.cap_index; ++k) {
    out << k << ',' << format_double(sol.times[k]) << ',' << format_double(sol.orth_residual[k])
        << ',' << format_double(sol.proj_residual[k]) << "\n";
  }
  written.push_back(out_dir + "/lsmc_steps.csv");
  json summary = {{"y0", sol.y0},
                  {"y0_stderr", y0_stderr},
                  {"path_count", sol.path_count},
                  {"mesh", cfg.lsmc_mesh},
                  {"z_clock_integral", sol.z_clock_integral},
                  {"max_orth_residual", sol.orth_residual.size() ? sol.orth_residual.maxCoeff() : 0.0}};
  if (cfg.lsmc_store_paths) summary["n_s2_norm"] = sol.n_s2_norm;
  const std::string path = out_dir + "/summary.json";
  write_json(summary, path);
  written.push_back(path);
  return written;
}

std::vector<std::string> run_oracle(const ExperimentConfig& cfg, const std::string& out_dir) {
  const Problem problem = make_problem(cfg);
  const ReferenceSolution ref =
      solve_bvp(problem.gen, [&](double x) { return problem.terminal(x, 0.0); }, cfg.barrier_a,
                cfg.bvp_grid_size);
  std::vector<std::string> written;
  auto out = open_out(out_dir + "/oracle.csv");
  out << "x,u,u_prime\n";
  for (Eigen::Index i = 0; i < ref.grid.size(); ++i) {
    out << format_double(ref.grid[i]) << ',' << format_double(ref.u[i]) << ','
        << format_double(ref.u_prime[i]) << "\n";
  }
  written.push_back(out_dir + "/oracle.csv");
  const json summary = {{"a", ref.a},
                        {"grid_size", cfg.bvp_grid_size},
                        {"u0", ref.eval(0.0)},
                        {"residual", ref.residual}};
  const std::string path = out_dir + "/oracle.json";
  write_json(summary, path);
  written.push_back(path);
  return written;
}

}  // namespace

std::vector<std::string> run_experiment(const ExperimentConfig& cfg,
                                        const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  if (cfg.scheme == "lattice") return run_lattice(cfg, out_dir);
  if (cfg.scheme == "picard") return run_picard(cfg, out_dir);
  if (cfg.scheme == "lsmc") return run_lsmc(cfg, out_dir);
  if (cfg.scheme == "oracle-only") return run_oracle(cfg, out_dir);
  throw std::invalid_argument("run_experiment: unknown scheme '" + cfg.scheme + "'");
}

VerifyReport run_verify(const ExperimentConfig& cfg) {
  const Problem problem = make_problem(cfg);
  const int n = cfg.n_list.empty() ? 8 : cfg.n_list.front();
  const int cap = std::min(cfg.horizon_T, 2);
  const StoppingRule rule = [&] {
    StoppingRule r = make_lattice_rule(cfg.barrier_a, n, cap, cfg.two_sided);
    if (cfg.barrier_an) r.barrier_an = *cfg.barrier_an;
    return r;
  }();
  NodeSolveConfig node_cfg;
  node_cfg.fixed_point_tol = cfg.fixed_point_tol;
  node_cfg.max_iters = cfg.max_iters;
  const LatticeSpec spec{n, cap};
  const DiscreteSolution sol = backward_solve(spec, problem.gen, problem.terminal, rule, node_cfg);

  VerifyReport report;
  auto add = [&](const std::string& name, double residual, double tol) {
    report.checks.push_back({name, residual, tol, residual <= tol});
  };

  const IdentityResiduals res = identity_residuals_sampled(sol, problem.gen, 64, cfg.seed);
  add("eq2_one_step_residual", res.eq2, 1e-12);
  add("martingale_child_average", res.child_avg, 1e-12);
  add("quadratic_variation_identity", res.qv, 1e-12);
  add("freezing_y_after_exit", res.freeze_y, 0.0);
  add("freezing_z_after_exit", res.freeze_z, 0.0);

  // Adaptedness: mutating increments after the exit step must not change the
  // traced prefix.
  double adapted = 0.0;
  for (int i = 0; i < 16; ++i) {
    Eigen::VectorXi eps = random_increments(sol.depth, cfg.seed, 1000 + i);
    const PathTrace base = trace_path(sol, problem.gen, eps);
    Eigen::VectorXi mutated = eps;
    for (Eigen::Index k = base.exit_step; k < mutated.size(); ++k) mutated[k] = -mutated[k];
    const PathTrace again = trace_path(sol, problem.gen, mutated);
    const Eigen::Index upto = std::min<Eigen::Index>(base.exit_step, sol.depth);
    for (Eigen::Index k = 0; k <= upto; ++k)
      adapted = std::max(adapted, std::abs(base.y[k] - again.y[k]));
    for (Eigen::Index k = 0; k < upto; ++k)
      adapted = std::max(adapted, std::abs(base.z[k] - again.z[k]));
  }
  add("adaptedness_prefix_invariance", adapted, 0.0);

  // Stopped-integral relation on random step integrands.
  SplitMix64 rng = stream_rng(cfg.seed, 0x1e44a);
  double stopped_gap = 0.0;
  for (int trial = 0; trial < 256; ++trial) {
    Eigen::VectorXd f(2 * n + 1);
    for (auto& v : f.reshaped()) v = 2.0 * rng.uniform01() - 1.0;
    const double tau = 2.0 * rng.uniform01();
    const double t = 2.0 * rng.uniform01();
    const StoppedIntegralPair pair = stopped_integral_identity(f, tau, t, n);
    stopped_gap = std::max(stopped_gap, std::abs(pair.stopped_integral - pair.integral_of_stopped));
  }
  add("stopped_integral_identity", stopped_gap, 1e-14);

  // Bracket of the stopped clock, both routes.
  const Eigen::VectorXd subdivision = uniform_subdivision(2.0, 0.125);
  Eigen::VectorXd eval_times(33);
  for (Eigen::Index i = 0; i < eval_times.size(); ++i) eval_times[i] = 2.2 * i / 32.0;
  double bracket_gap = 0.0;
  for (const double tau : {0.0, 0.375, 1.0, 2.0, 3.0}) {
    bracket_gap =
        std::max(bracket_gap, bracket_stopped_identity(subdivision, tau, eval_times).max_gap);
  }
  add("bracket_stopped_identity", bracket_gap, 1e-14);

  // Picard limit against the direct solve.
  const PicardResult picard =
      picard_solve(spec, problem.gen, problem.terminal, rule, cfg.picard_p_max, cfg.picard_tol);
  const double contraction = problem.gen.lipschitz_K / n;
  const double picard_bound = cfg.picard_tol / std::max(1e-16, 1.0 - contraction);
  add("picard_vs_direct", picard_gap(picard.iterate.values, sol), picard_bound);

  return report;
}

}  // namespace bsde
