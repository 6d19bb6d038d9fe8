#include "bsde/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bsde/errors.hpp"

namespace bsde {
namespace {

double interp(const Eigen::VectorXd& grid, const Eigen::VectorXd& values, double x) {
  const double lo = grid[0], hi = grid[grid.size() - 1];
  if (x <= lo) return values[0];
  if (x >= hi) return values[values.size() - 1];
  const double* begin = grid.data();
  const double* it = std::upper_bound(begin, begin + grid.size(), x);
  const auto i = static_cast<Eigen::Index>(it - begin);  // grid[i-1] <= x < grid[i]
  const double w = (x - grid[i - 1]) / (grid[i] - grid[i - 1]);
  return (1.0 - w) * values[i - 1] + w * values[i];
}

}  // namespace

double ReferenceSolution::eval(double x) const { return interp(grid, u, x); }

double ReferenceSolution::eval_prime(double x) const { return interp(grid, u_prime, x); }

namespace {

// Residual of the interior equations for the current interior iterate v.
Eigen::VectorXd bvp_residual(const Eigen::VectorXd& v, double ga, double gb, double h,
                             const Generator& gen) {
  const Eigen::Index m = v.size();
  Eigen::VectorXd res(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double left = (i == 0) ? ga : v[i - 1];
    const double right = (i == m - 1) ? gb : v[i + 1];
    const double upp = (right - 2.0 * v[i] + left) / (h * h);
    const double uprime = (right - left) / (2.0 * h);
    const double f = gen.eval(0.0, v[i], uprime);
    if (!std::isfinite(f)) throw GeneratorError("solve_bvp: non-finite driver value");
    res[i] = 0.5 * upp + f;
  }
  return res;
}

// Tridiagonal solve (Thomas); diag/lower/upper are overwritten.
Eigen::VectorXd solve_tridiagonal(Eigen::VectorXd lower, Eigen::VectorXd diag,
                                  Eigen::VectorXd upper, Eigen::VectorXd rhs) {
  const Eigen::Index m = diag.size();
  for (Eigen::Index i = 1; i < m; ++i) {
    if (diag[i - 1] == 0.0) throw OracleError("solve_bvp: singular Jacobian");
    const double w = lower[i] / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  if (diag[m - 1] == 0.0) throw OracleError("solve_bvp: singular Jacobian");
  Eigen::VectorXd x(m);
  x[m - 1] = rhs[m - 1] / diag[m - 1];
  for (Eigen::Index i = m - 2; i >= 0; --i) x[i] = (rhs[i] - upper[i] * x[i + 1]) / diag[i];
  return x;
}

}  // namespace

ReferenceSolution solve_bvp(const Generator& gen, const std::function<double(double)>& g,
                            double a, int grid_size, double residual_tol, int max_newton) {
  if (!(a > 0.0)) throw std::invalid_argument("solve_bvp: a must be > 0");
  if (grid_size < 8) throw std::invalid_argument("solve_bvp: grid_size must be >= 8");
  const Eigen::Index N = grid_size;
  const double h = 2.0 * a / static_cast<double>(N);
  Eigen::VectorXd grid(N + 1);
  for (Eigen::Index i = 0; i <= N; ++i) grid[i] = -a + static_cast<double>(i) * h;
  const double ga = g(-a), gb = g(a);

  // Interior unknowns, started from the linear interpolant of the data.
  Eigen::VectorXd v(N - 1);
  for (Eigen::Index i = 0; i < N - 1; ++i) {
    const double w = static_cast<double>(i + 1) / static_cast<double>(N);
    v[i] = (1.0 - w) * ga + w * gb;
  }

  const double fd_step = 1e-6;
  Eigen::VectorXd res = bvp_residual(v, ga, gb, h, gen);
  double res_norm = res.cwiseAbs().maxCoeff();
  int newton = 0;
  while (res_norm >= residual_tol) {
    if (++newton > max_newton) throw OracleError("solve_bvp: Newton did not converge");
    const Eigen::Index m = v.size();
    Eigen::VectorXd lower(m), diag(m), upper(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double left = (i == 0) ? ga : v[i - 1];
      const double right = (i == m - 1) ? gb : v[i + 1];
      const double uprime = (right - left) / (2.0 * h);
      const double fy = (gen.eval(0.0, v[i] + fd_step, uprime) -
                         gen.eval(0.0, v[i] - fd_step, uprime)) /
                        (2.0 * fd_step);
      const double fz = (gen.eval(0.0, v[i], uprime + fd_step) -
                         gen.eval(0.0, v[i], uprime - fd_step)) /
                        (2.0 * fd_step);
      diag[i] = -1.0 / (h * h) + fy;
      lower[i] = 0.5 / (h * h) - fz / (2.0 * h);
      upper[i] = 0.5 / (h * h) + fz / (2.0 * h);
    }
    const Eigen::VectorXd step = solve_tridiagonal(lower, diag, upper, -res);

    // Damping: halve until the residual decreases.
    double factor = 1.0;
    bool accepted = false;
    for (int halving = 0; halving < 40; ++halving) {
      const Eigen::VectorXd trial = v + factor * step;
      const Eigen::VectorXd trial_res = bvp_residual(trial, ga, gb, h, gen);
      const double trial_norm = trial_res.cwiseAbs().maxCoeff();
      if (trial_norm < res_norm) {
        v = trial;
        res = trial_res;
        res_norm = trial_norm;
        accepted = true;
        break;
      }
      factor *= 0.5;
    }
    if (!accepted) throw OracleError("solve_bvp: damped Newton stalled");
  }

  ReferenceSolution ref;
  ref.a = a;
  ref.grid = grid;
  ref.residual = res_norm;
  ref.u.resize(N + 1);
  ref.u[0] = ga;
  ref.u[N] = gb;
  for (Eigen::Index i = 0; i < N - 1; ++i) ref.u[i + 1] = v[i];
  ref.u_prime.resize(N + 1);
  for (Eigen::Index i = 1; i < N; ++i) ref.u_prime[i] = (ref.u[i + 1] - ref.u[i - 1]) / (2.0 * h);
  ref.u_prime[0] = (-3.0 * ref.u[0] + 4.0 * ref.u[1] - ref.u[2]) / (2.0 * h);
  ref.u_prime[N] = (3.0 * ref.u[N] - 4.0 * ref.u[N - 1] + ref.u[N - 2]) / (2.0 * h);
  return ref;
}

double enumerate_path_expectation(int n, int depth,
                                  const std::function<double(const WalkPath&)>& functional) {
  if (depth < 1 || depth > 24)
    throw std::length_error("enumerate_path_expectation: depth must be in [1, 24]");
  WalkParams params;
  params.n = n;
  params.horizon_T = (depth + n - 1) / n;
  const long long steps = total_steps(params);
  Eigen::VectorXi eps = Eigen::VectorXi::Ones(steps);  // padding beyond depth is inert
  double total = 0.0;
  const std::uint64_t count = 1ull << depth;
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    for (int k = 0; k < depth; ++k) eps[k] = (mask >> k) & 1 ? 1 : -1;
    total += functional(walk_from_increments(params, eps));
  }
  return total / static_cast<double>(count);
}

namespace {

double tree_value(int k, int j, int depth, int n, const Generator& gen,
                  const TerminalCondition& terminal, const StoppingRule& rule,
                  const NodeSolveConfig& cfg) {
  const double pos = lattice_position(j, n);
  if (k >= 1 && rule.exceeds(pos)) return terminal(pos, static_cast<double>(k) / n);
  if (k == depth) return terminal(pos, rule.cap);
  const double up = tree_value(k + 1, j + 1, depth, n, gen, terminal, rule, cfg);
  const double dn = tree_value(k + 1, j - 1, depth, n, gen, terminal, rule, cfg);
  const double z = lattice_conditional_z(up, dn, n, true);
  return solve_node_y(0.5 * (up + dn), z, static_cast<double>(k) / n, gen, n, cfg);
}

}  // namespace

double enumerate_backward_value(int n, const Generator& gen, const TerminalCondition& terminal,
                                const StoppingRule& rule, const NodeSolveConfig& cfg) {
  const auto depth = static_cast<int>(clock_step(rule.cap, n));
  if (depth < 1 || depth > 24)
    throw std::length_error("enumerate_backward_value: step budget must be in [1, 24]");
  return tree_value(0, 0, depth, n, gen, terminal, rule, cfg);
}

double enumerate_exit_expectation(int n, const TerminalCondition& terminal,
                                  const StoppingRule& rule) {
  const auto depth = static_cast<int>(clock_step(rule.cap, n));
  return enumerate_path_expectation(n, depth, [&](const WalkPath& walk) {
    const StoppingSample stop = hitting_time_lattice(walk, rule);
    return terminal(walk.values[stop.exit_index], stop.tau);
  });
}

double exit_value_expectation(const std::function<double(double)>& g, double a) {
  return 0.5 * (g(a) + g(-a));
}

}  // namespace bsde
