#include "bsde/lattice.hpp"

#include <cmath>
#include <stdexcept>

#include "bsde/errors.hpp"
#include "bsde/rng.hpp"

namespace bsde {

double solve_implicit_y(double mean, double z, double t, const Generator& gen,
                        double dt, const NodeSolveConfig& cfg) {
  if (!(dt > 0.0)) throw std::invalid_argument("solve_implicit_y: dt must be > 0");
  if (gen.lipschitz_K * dt >= 1.0)
    throw ContractionError("solve_implicit_y: K*dt >= 1, node map is not a contraction");
  double y = mean + cfg.init_offset;
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    const double f = gen.eval(t, y, z);
    if (!std::isfinite(f)) throw GeneratorError("solve_implicit_y: non-finite driver value");
    const double next = mean + f * dt;
    if (std::abs(next - y) < cfg.fixed_point_tol) return next;
    y = next;
  }
  throw SolverError("solve_implicit_y: fixed point did not converge");
}

double solve_node_y(double mean, double z, double t, const Generator& gen, int n,
                    const NodeSolveConfig& cfg) {
  return solve_implicit_y(mean, z, t, gen, 1.0 / n, cfg);
}

double lattice_conditional_z(double y_up, double y_down, int n, bool active) {
  if (!active) return 0.0;
  return std::sqrt(static_cast<double>(n)) * 0.5 * (y_up - y_down);
}

LatticeLayout::LatticeLayout(int n, int depth, int barrier_index, bool two_sided)
    : n_(n), depth_(depth), barrier_index_(barrier_index), two_sided_(two_sided) {
  if (n < 1) throw std::invalid_argument("LatticeLayout: n must be >= 1");
  if (depth < 0) throw std::invalid_argument("LatticeLayout: negative depth");
  if (barrier_index < 1) throw std::invalid_argument("LatticeLayout: barrier index must be >= 1");
  offset_.resize(depth + 2);
  offset_[0] = 0;
  for (int k = 0; k <= depth; ++k) {
    const int lo = j_lo(k), hi = j_hi(k);
    const Eigen::Index count = (hi >= lo) ? (hi - lo) / 2 + 1 : 0;
    offset_[k + 1] = offset_[k] + count;
  }
  size_ = offset_[depth + 1];
}

int LatticeLayout::j_lo(int k) const {
  const int lo = two_sided_ ? std::max(-k, -barrier_index_) : -k;
  return ((lo + k) % 2 == 0) ? lo : lo + 1;
}

int LatticeLayout::j_hi(int k) const {
  const int hi = std::min(k, barrier_index_);
  return ((hi + k) % 2 == 0) ? hi : hi - 1;
}

bool LatticeLayout::contains(int k, int j) const {
  if (k < 0 || k > depth_) return false;
  if ((j + k) % 2 != 0) return false;
  return j >= j_lo(k) && j <= j_hi(k);
}

Eigen::Index LatticeLayout::index(int k, int j) const {
  if (!contains(k, j)) throw std::out_of_range("LatticeLayout::index: node not on lattice");
  return offset_[k] + (j - j_lo(k)) / 2;
}

namespace {

NodeKind classify(const LatticeLayout& layout, int k, int j) {
  const int m = layout.barrier_index();
  const bool exceeded = layout.two_sided() ? std::abs(j) >= m : j >= m;
  if (exceeded && k >= 1) return NodeKind::Exit;
  if (k == layout.depth()) return NodeKind::Cap;
  return NodeKind::Interior;
}

}  // namespace

int barrier_index_for(const StoppingRule& rule, int n, int depth) {
  if (!(rule.barrier_an > 0.0))
    throw std::invalid_argument("barrier_index_for: lattice barriers must be positive");
  for (int j = 1; j <= depth; ++j) {
    if (rule.exceeds(lattice_position(j, n))) return j;
  }
  return depth + 1;
}

DiscreteSolution backward_solve(const LatticeSpec& spec, const Generator& gen,
                                const TerminalCondition& terminal, const StoppingRule& rule,
                                const NodeSolveConfig& cfg) {
  if (spec.n < 1) throw std::invalid_argument("backward_solve: n must be >= 1");
  if (spec.horizon_T < 1) throw std::invalid_argument("backward_solve: horizon_T must be >= 1");
  if (gen.lipschitz_K >= spec.n)
    throw ContractionError("backward_solve: requires n > K");
  if (rule.cap > static_cast<double>(spec.horizon_T))
    throw std::invalid_argument("backward_solve: cap exceeds lattice horizon");
  const int n = spec.n;
  const auto depth = static_cast<int>(clock_step(rule.cap, n));
  if (depth < 1) throw std::invalid_argument("backward_solve: cap shorter than one step");

  DiscreteSolution sol;
  sol.spec = spec;
  sol.rule = rule;
  sol.depth = depth;
  sol.barrier_index = barrier_index_for(rule, n, depth);
  sol.layout = LatticeLayout(n, depth, sol.barrier_index, rule.two_sided);
  sol.y.resize(sol.layout.size());
  sol.z.resize(sol.layout.size());
  sol.kinds.resize(sol.layout.size());

  for (int k = depth; k >= 0; --k) {
    for (int j = sol.layout.j_lo(k); j <= sol.layout.j_hi(k); j += 2) {
      const Eigen::Index idx = sol.layout.index(k, j);
      const NodeKind kind = classify(sol.layout, k, j);
      sol.kinds[idx] = kind;
      const double pos = lattice_position(j, n);
      switch (kind) {
        case NodeKind::Exit:
          sol.y[idx] = terminal(pos, static_cast<double>(k) / n);
          sol.z[idx] = 0.0;
          break;
        case NodeKind::Cap:
          sol.y[idx] = terminal(pos, rule.cap);
          sol.z[idx] = 0.0;
          break;
        case NodeKind::Interior: {
          const double y_up = sol.y[sol.layout.index(k + 1, j + 1)];
          const double y_dn = sol.y[sol.layout.index(k + 1, j - 1)];
          const double z = lattice_conditional_z(y_up, y_dn, n, true);
          const double mean = 0.5 * (y_up + y_dn);
          sol.z[idx] = z;
          sol.y[idx] = solve_node_y(mean, z, static_cast<double>(k) / n, gen, n, cfg);
          break;
        }
      }
    }
  }
  return sol;
}

PathTrace trace_path(const DiscreteSolution& sol, const Generator& gen,
                     const Eigen::VectorXi& increments) {
  const int n = sol.n();
  const int depth = sol.depth;
  if (increments.size() < depth)
    throw std::invalid_argument("trace_path: increment sequence shorter than lattice depth");
  const double scale = walk_scale(n);

  PathTrace trace;
  trace.y.resize(depth + 1);
  trace.z.setZero(depth);
  trace.martingale.resize(depth + 1);
  trace.driver_integral.setZero(depth + 1);
  trace.qv.setZero(depth + 1);
  trace.z_quadrature.setZero(depth + 1);
  trace.exit_step = depth;
  trace.capped = true;

  int j = 0;
  bool stopped = false;
  double integral = 0.0;
  trace.y[0] = sol.y_at(0, 0);
  trace.martingale[0] = trace.y[0];
  for (int k = 0; k < depth; ++k) {
    const int eps = increments[k];
    if (eps != 1 && eps != -1) throw std::invalid_argument("trace_path: increments must be +/-1");
    double y_next, z_here = 0.0, f_over_n = 0.0;
    if (!stopped) {
      const double y_here = sol.y_at(k, j);
      const double y_up = sol.y_at(k + 1, j + 1);
      const double y_dn = sol.y_at(k + 1, j - 1);
      z_here = sol.z_at(k, j);
      f_over_n = gen.eval(static_cast<double>(k) / n, y_here, z_here) / n;
      const double i_next = integral + f_over_n;
      // One-step residuals against both branches.
      const double r_up = y_here - y_up - f_over_n + z_here * scale;
      const double r_dn = y_here - y_dn - f_over_n - z_here * scale;
      trace.eq2_residual = std::max({trace.eq2_residual, std::abs(r_up), std::abs(r_dn)});
      const double m_here = y_here + integral;
      const double m_up = y_up + i_next;
      const double m_dn = y_dn + i_next;
      trace.child_avg_residual =
          std::max(trace.child_avg_residual, std::abs(m_here - 0.5 * (m_up + m_dn)));
      j += eps;
      integral = i_next;
      y_next = sol.y_at(k + 1, j);
      const NodeKind next_kind = sol.kind_at(k + 1, j);
      if (next_kind == NodeKind::Exit) {
        stopped = true;
        trace.exit_step = k + 1;
        trace.capped = false;
        trace.xi = y_next;
      } else if (k + 1 == depth) {
        trace.xi = y_next;  // capped terminal
      }
    } else {
      y_next = trace.xi;  // frozen at the exit value
    }
    trace.z[k] = z_here;
    trace.y[k + 1] = y_next;
    trace.driver_integral[k + 1] = integral;
    trace.martingale[k + 1] = y_next + integral;
    const double dm = trace.martingale[k + 1] - trace.martingale[k];
    trace.qv[k + 1] = trace.qv[k] + dm * dm;
    trace.z_quadrature[k + 1] = trace.z_quadrature[k] + z_here * z_here / n;
    trace.qv_residual =
        std::max(trace.qv_residual, std::abs(trace.qv[k + 1] - trace.z_quadrature[k + 1]));
  }
  return trace;
}

namespace {

void fold_residuals(IdentityResiduals& acc, const PathTrace& trace) {
  acc.eq2 = std::max(acc.eq2, trace.eq2_residual);
  acc.child_avg = std::max(acc.child_avg, trace.child_avg_residual);
  acc.qv = std::max(acc.qv, trace.qv_residual);
  for (Eigen::Index k = trace.exit_step; k <= trace.y.size() - 1; ++k)
    acc.freeze_y = std::max(acc.freeze_y, std::abs(trace.y[k] - trace.xi));
  for (Eigen::Index k = trace.exit_step; k < trace.z.size(); ++k)
    acc.freeze_z = std::max(acc.freeze_z, std::abs(trace.z[k]));
}

}  // namespace

IdentityResiduals identity_residuals_sampled(const DiscreteSolution& sol, const Generator& gen,
                                             int path_count, std::uint64_t seed) {
  IdentityResiduals acc;
  for (int i = 0; i < path_count; ++i) {
    const Eigen::VectorXi eps = random_increments(sol.depth, seed, static_cast<std::uint64_t>(i));
    fold_residuals(acc, trace_path(sol, gen, eps));
  }
  return acc;
}

IdentityResiduals identity_residuals_enumerated(const DiscreteSolution& sol,
                                                const Generator& gen) {
  IdentityResiduals acc;
  for_each_increment_sequence(sol.depth, [&](const Eigen::VectorXi& eps) {
    fold_residuals(acc, trace_path(sol, gen, eps));
  });
  return acc;
}

namespace {

// Integral of the step function (f[k] on [k/n, (k+1)/n)) over [0, x].
double integrate_step(const Eigen::VectorXd& f, double x, int n) {
  const long long cell = clock_step(x, n);
  if (cell >= f.size())
    throw std::invalid_argument("stopped_integral_identity: integrand samples too short");
  double total = 0.0;
  for (long long k = 0; k < cell; ++k) total += f[k] / n;
  const double partial = x - static_cast<double>(cell) / n;
  if (partial > 0.0) total += f[cell] * partial;
  return total;
}

}  // namespace

StoppedIntegralPair stopped_integral_identity(const Eigen::VectorXd& f_samples, double tau,
                                              double t, int n) {
  if (f_samples.size() == 0)
    throw std::invalid_argument("stopped_integral_identity: empty integrand");
  if (!(tau >= 0.0) || !(t >= 0.0))
    throw std::invalid_argument("stopped_integral_identity: negative time");
  StoppedIntegralPair pair;
  pair.stopped_integral = integrate_step(f_samples, std::min(t, tau), n);

  const long long tau_cell = clock_step(tau, n);
  if (tau_cell >= f_samples.size())
    throw std::invalid_argument("stopped_integral_identity: integrand samples too short");
  Eigen::VectorXd stopped(f_samples.size());
  for (Eigen::Index k = 0; k < f_samples.size(); ++k)
    stopped[k] = f_samples[std::min<Eigen::Index>(k, static_cast<Eigen::Index>(tau_cell))];
  pair.integral_of_stopped =
      integrate_step(stopped, t, n) + (std::min(tau, t) - t) * f_samples[tau_cell];
  return pair;
}

Eigen::VectorXi random_increments(long long steps, std::uint64_t seed, std::uint64_t stream) {
  SplitMix64 rng = stream_rng(seed, stream);
  Eigen::VectorXi eps(steps);
  for (long long k = 0; k < steps; ++k) eps[k] = rng.sign();
  return eps;
}

void for_each_increment_sequence(int depth,
                                 const std::function<void(const Eigen::VectorXi&)>& fn) {
  if (depth < 0 || depth > 24)
    throw std::length_error("for_each_increment_sequence: depth must be in [0, 24]");
  Eigen::VectorXi eps(depth);
  const std::uint64_t count = 1ull << depth;
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    for (int k = 0; k < depth; ++k) eps[k] = (mask >> k) & 1 ? 1 : -1;
    fn(eps);
  }
}

}  // namespace bsde
