#include "bsde/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "bsde/rng.hpp"

namespace bsde {

double sup_process_distance(const Eigen::VectorXd& grid, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& y, double L) {
  if (grid.size() != x.size() || grid.size() != y.size())
    throw std::invalid_argument("sup_process_distance: grid mismatch");
  double sup = 0.0;
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    if (grid[i] > L) break;
    sup = std::max(sup, std::abs(x[i] - y[i]));
  }
  return sup;
}

double sup_node_error(const DiscreteSolution& sol, const ReferenceSolution& ref,
                      double window_L) {
  const int n = sol.n();
  double sup = 0.0;
  const int k_max = static_cast<int>(std::min<long long>(sol.depth, clock_step(window_L, n)));
  for (int k = 0; k <= k_max; ++k) {
    for (int j = sol.layout.j_lo(k); j <= sol.layout.j_hi(k); j += 2) {
      const Eigen::Index idx = sol.layout.index(k, j);
      if (sol.kinds[idx] != NodeKind::Interior) continue;
      const double gap = std::abs(sol.y[idx] - ref.eval(lattice_position(j, n)));
      sup = std::max(sup, gap);
    }
  }
  return sup;
}

double z_l2_distance(const DiscreteSolution& sol, const ReferenceSolution& ref) {
  const int n = sol.n();
  const LatticeLayout& layout = sol.layout;
  // A node stops counting at the first exceedance of either barrier.
  auto ref_absorbed = [&](int j) { return std::abs(lattice_position(j, n)) > ref.a; };

  Eigen::VectorXd weight = Eigen::VectorXd::Zero(layout.size());
  weight[layout.index(0, 0)] = 1.0;
  double total = 0.0;
  for (int k = 0; k < sol.depth; ++k) {
    for (int j = layout.j_lo(k); j <= layout.j_hi(k); j += 2) {
      const Eigen::Index idx = layout.index(k, j);
      const double w = weight[idx];
      if (w == 0.0) continue;
      if (sol.kinds[idx] != NodeKind::Interior || ref_absorbed(j)) continue;
      const double gap = sol.z[idx] - ref.eval_prime(lattice_position(j, n));
      total += w * gap * gap / n;
      weight[layout.index(k + 1, j + 1)] += 0.5 * w;
      weight[layout.index(k + 1, j - 1)] += 0.5 * w;
    }
  }
  return total;
}

double qv_residual_metric(const DiscreteSolution& sol, const Generator& gen, int paths,
                          std::uint64_t seed) {
  return identity_residuals_sampled(sol, gen, paths, seed).qv;
}

double martingale_residual_metric(const DiscreteSolution& sol, const Generator& gen, int paths,
                                  std::uint64_t seed) {
  return identity_residuals_sampled(sol, gen, paths, seed).child_avg;
}

double martingale_convergence_diag(const DiscreteSolution& f0_sol, const ReferenceSolution& ref,
                                   int paths, std::uint64_t seed) {
  const int n = f0_sol.n();
  double mean_sup = 0.0;
  for (int i = 0; i < paths; ++i) {
    const Eigen::VectorXi eps =
        random_increments(f0_sol.depth, seed, static_cast<std::uint64_t>(i));
    double sup = 0.0;
    int j = 0;
    for (int k = 0; k < f0_sol.depth; ++k) {
      if (f0_sol.kind_at(k, j) != NodeKind::Interior) break;
      sup = std::max(sup, std::abs(f0_sol.y_at(k, j) - ref.eval(lattice_position(j, n))));
      j += eps[k];
    }
    mean_sup += sup;
  }
  return mean_sup / paths;
}

Eigen::VectorXd node_martingale_mean(const DiscreteSolution& sol, const Generator& gen) {
  const int n = sol.n();
  const LatticeLayout& layout = sol.layout;
  Eigen::VectorXd weight = Eigen::VectorXd::Zero(layout.size());
  Eigen::VectorXd integral_acc = Eigen::VectorXd::Zero(layout.size());
  weight[layout.index(0, 0)] = 1.0;
  for (int k = 0; k < sol.depth; ++k) {
    for (int j = layout.j_lo(k); j <= layout.j_hi(k); j += 2) {
      const Eigen::Index idx = layout.index(k, j);
      const double w = weight[idx];
      if (w == 0.0 || sol.kinds[idx] != NodeKind::Interior) continue;
      const double mean_integral = integral_acc[idx] / w;
      const double f = gen.eval(static_cast<double>(k) / n, sol.y[idx], sol.z[idx]);
      const double next_integral = mean_integral + f / n;
      for (const int dj : {+1, -1}) {
        const Eigen::Index child = layout.index(k + 1, j + dj);
        weight[child] += 0.5 * w;
        integral_acc[child] += 0.5 * w * next_integral;
      }
    }
  }
  Eigen::VectorXd m(layout.size());
  for (Eigen::Index idx = 0; idx < layout.size(); ++idx) {
    const double mean_integral = weight[idx] > 0.0 ? integral_acc[idx] / weight[idx] : 0.0;
    m[idx] = sol.y[idx] + mean_integral;
  }
  return m;
}

}  // namespace bsde
