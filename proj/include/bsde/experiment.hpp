#pragma once

#include <string>
#include <vector>

#include "bsde/config.hpp"
#include "bsde/lattice.hpp"
#include "bsde/metrics.hpp"
#include "bsde/oracle.hpp"

namespace bsde {

// Problem pieces assembled from a config.
struct Problem {
  Generator gen;
  TerminalCondition terminal;
};

Problem make_problem(const ExperimentConfig& cfg);

// Stopping rule at scale n: aligned barrier unless the config pins one.
StoppingRule rule_for(const ExperimentConfig& cfg, int n);

// Multi-n lattice sweep against the BVP reference.
ConvergenceReport run_convergence_study(const ExperimentConfig& cfg);

// Dispatches one experiment; returns the artifact files written.
std::vector<std::string> run_experiment(const ExperimentConfig& cfg,
                                        const std::string& out_dir);

// Invariant suite on a small instance of the configured problem.
struct VerifyCheck {
  std::string name;
  double residual = 0.0;
  double tol = 0.0;
  bool pass = false;
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

VerifyReport run_verify(const ExperimentConfig& cfg);

// Pinned CSV number format: '.' decimal separator, shortest round-trip.
std::string format_double(double value);

void write_convergence_csv(const ConvergenceReport& report, const std::string& path);
void write_convergence_json(const ConvergenceReport& report, const std::string& path);
void write_lattice_csv(const DiscreteSolution& sol, const Generator& gen,
                       const std::string& path);

}  // namespace bsde
