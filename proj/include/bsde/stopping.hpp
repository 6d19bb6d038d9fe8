#pragma once

#include <Eigen/Dense>
#include <vector>

#include "bsde/paths.hpp"

namespace bsde {

// First-passage rule with cap: tau = inf{t in (0, cap] : exceeds(x(t))} ^ cap,
// strict inequality. Two-sided tests |x| > barrier, one-sided tests x > barrier.
struct StoppingRule {
  double barrier_a = 1.0;    // continuous-limit barrier a
  double barrier_an = 1.0;   // barrier applied at the current scale
  double cap = 1.0;          // the "^ cap" bound on tau
  bool two_sided = true;

  bool exceeds(double x) const { return two_sided ? std::abs(x) > barrier_an : x > barrier_an; }
};

// Default per-n barrier: the half-step offset level (floor(a*sqrt(n)) + 1/2)/sqrt(n).
// No lattice point ever equals it, so ">" and ">=" agree, and a^n -> a.
double aligned_barrier(double a, int n);

StoppingRule make_lattice_rule(double a, int n, double cap, bool two_sided = true);

struct StoppingSample {
  double tau = 0.0;
  long long exit_index = 0;  // step index (walk) or subdivision index (discretized)
  bool capped = false;
};

// One-sided passage functional on a cadlag grid path:
// inf{t in (0, cap_n] : x(t) > a_n} ^ cap_n, where x is the step function
// holding x[i] on [grid[i], grid[i+1]).
double first_passage_functional(const Eigen::VectorXd& grid, const Eigen::VectorXd& x,
                                double a_n, double cap_n);

// tau^n = inf{t in (0, cap] : |W^n_t| > a^n} ^ cap on the scaled walk.
StoppingSample hitting_time_lattice(const WalkPath& walk, const StoppingRule& rule);

// Same rule evaluated on a path discretized over `subdivision` (the path may
// be the fine path itself; only its values at subdivision points are read).
StoppingSample hitting_time_discretized(const FinePath& path,
                                        const Eigen::VectorXd& subdivision,
                                        const StoppingRule& rule);

// Per-realization diagnostics across refinement levels on common paths.
struct MonotoneLimitReport {
  double monotone_fraction = 0.0;     // paths with tau nonincreasing across levels
  std::vector<double> mean_gap;       // per level, mean |tau_level - tau_fine|
  std::size_t path_count = 0;
};

MonotoneLimitReport monotone_limit_check(
    const std::vector<std::vector<StoppingSample>>& per_level,
    const std::vector<double>& tau_fine);

}  // namespace bsde
