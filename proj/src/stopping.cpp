#include "bsde/stopping.hpp"

#include <cmath>
#include <stdexcept>

namespace bsde {

double aligned_barrier(double a, int n) {
  if (!(a > 0.0)) throw std::invalid_argument("aligned_barrier: barrier must be > 0");
  if (n < 1) throw std::invalid_argument("aligned_barrier: n must be >= 1");
  const double root_n = std::sqrt(static_cast<double>(n));
  return (std::floor(a * root_n) + 0.5) / root_n;
}

StoppingRule make_lattice_rule(double a, int n, double cap, bool two_sided) {
  if (!(cap > 0.0)) throw std::invalid_argument("make_lattice_rule: cap must be > 0");
  StoppingRule rule;
  rule.barrier_a = a;
  rule.barrier_an = aligned_barrier(a, n);
  rule.cap = cap;
  rule.two_sided = two_sided;
  return rule;
}

double first_passage_functional(const Eigen::VectorXd& grid, const Eigen::VectorXd& x,
                                double a_n, double cap_n) {
  if (grid.size() == 0) throw std::invalid_argument("first_passage_functional: empty grid");
  if (grid.size() != x.size())
    throw std::invalid_argument("first_passage_functional: grid/value size mismatch");
  if (grid[0] != 0.0)
    throw std::invalid_argument("first_passage_functional: grid must include 0");
  if (!(cap_n > 0.0)) throw std::invalid_argument("first_passage_functional: cap must be > 0");
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    if (grid[i] > cap_n) break;
    // A step function exceeding at grid[0] exceeds on all of (0, grid[1]),
    // so the infimum is grid[0] itself.
    if (x[i] > a_n) return grid[i];
  }
  return cap_n;
}

StoppingSample hitting_time_lattice(const WalkPath& walk, const StoppingRule& rule) {
  const int n = walk.params.n;
  const long long cap_step = clock_step(rule.cap, n);
  if (cap_step > walk.steps())
    throw std::invalid_argument("hitting_time_lattice: cap exceeds generated horizon");
  if (cap_step < 1)
    throw std::invalid_argument("hitting_time_lattice: cap shorter than one step");
  for (long long k = 1; k <= cap_step; ++k) {
    if (rule.exceeds(walk.values[k]))
      return {static_cast<double>(k) / n, k, false};
  }
  return {rule.cap, cap_step, true};
}

StoppingSample hitting_time_discretized(const FinePath& path,
                                        const Eigen::VectorXd& subdivision,
                                        const StoppingRule& rule) {
  const auto indices = subdivision_indices(path.grid, subdivision);
  long long last_in_cap = 0;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const double t = subdivision[static_cast<Eigen::Index>(k)];
    if (t > rule.cap) break;
    last_in_cap = static_cast<long long>(k);
    if (t <= 0.0) continue;
    if (rule.exceeds(path.values[indices[k]]))
      return {t, static_cast<long long>(k), false};
  }
  return {rule.cap, last_in_cap, true};
}

MonotoneLimitReport monotone_limit_check(
    const std::vector<std::vector<StoppingSample>>& per_level,
    const std::vector<double>& tau_fine) {
  if (per_level.empty()) throw std::invalid_argument("monotone_limit_check: no levels");
  const std::size_t paths = tau_fine.size();
  for (const auto& level : per_level)
    if (level.size() != paths)
      throw std::invalid_argument("monotone_limit_check: mismatched path sets");
  if (paths == 0) throw std::invalid_argument("monotone_limit_check: empty path set");

  MonotoneLimitReport report;
  report.path_count = paths;
  report.mean_gap.assign(per_level.size(), 0.0);
  std::size_t monotone = 0;
  for (std::size_t i = 0; i < paths; ++i) {
    bool nonincreasing = true;
    for (std::size_t l = 0; l < per_level.size(); ++l) {
      const double tau = per_level[l][i].tau;
      if (l > 0 && tau > per_level[l - 1][i].tau) nonincreasing = false;
      report.mean_gap[l] += std::abs(tau - tau_fine[i]);
    }
    if (nonincreasing) ++monotone;
  }
  for (auto& gap : report.mean_gap) gap /= static_cast<double>(paths);
  report.monotone_fraction = static_cast<double>(monotone) / static_cast<double>(paths);
  return report;
}

}  // namespace bsde
