#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "bsde/generators.hpp"
#include "bsde/paths.hpp"
#include "bsde/stopping.hpp"

namespace bsde {

// Node classification on the pruned lattice. Interior nodes carry the one-step
// equation; Exit nodes are first-exceedance states (y = xi, z = 0); Cap nodes
// sit on the final slice reached without exceedance.
enum class NodeKind : unsigned char { Interior, Exit, Cap };

struct NodeSolveConfig {
  double fixed_point_tol = 1e-14;
  int max_iters = 200;
  // Fixed-point start is the conditional mean plus this offset; nonzero
  // offsets exercise uniqueness of the contraction limit.
  double init_offset = 0.0;
};

// Unique solution of y = mean + f(t, y, z) * dt, a contraction for K*dt < 1.
double solve_implicit_y(double mean, double z, double t, const Generator& gen,
                        double dt, const NodeSolveConfig& cfg);

// Lattice node solve with dt = 1/n.
double solve_node_y(double mean, double z, double t, const Generator& gen, int n,
                    const NodeSolveConfig& cfg);

// z = sqrt(n) * E[y eps | F] on a symmetric Bernoulli branch; 0 when stopped.
double lattice_conditional_z(double y_up, double y_down, int n, bool active);

struct LatticeSpec {
  int n = 1;
  int horizon_T = 1;  // integer bound on the cap (tau <= horizon_T)
};

// Smallest j >= 1 whose position exceeds the rule's barrier, under the same
// floating-point comparison the hitting scan applies to walk values;
// depth + 1 when the barrier is unreachable. Requires a positive barrier.
int barrier_index_for(const StoppingRule& rule, int n, int depth);

// Recombining lattice pruned at the absorbing barrier levels. Slice k holds
// the signed indices j of the same parity as k inside [j_lo(k), j_hi(k)].
class LatticeLayout {
 public:
  LatticeLayout() = default;
  // barrier_index is the smallest j >= 1 whose position exceeds the barrier;
  // pass depth + 1 when the barrier is unreachable.
  LatticeLayout(int n, int depth, int barrier_index, bool two_sided);

  int n() const { return n_; }
  int depth() const { return depth_; }
  int barrier_index() const { return barrier_index_; }
  bool two_sided() const { return two_sided_; }

  int j_lo(int k) const;
  int j_hi(int k) const;
  bool contains(int k, int j) const;
  Eigen::Index index(int k, int j) const;
  Eigen::Index size() const { return size_; }

 private:
  int n_ = 1;
  int depth_ = 0;
  int barrier_index_ = 1;
  bool two_sided_ = true;
  std::vector<Eigen::Index> offset_;
  Eigen::Index size_ = 0;
};

// Adapted (y, z) fields of the discrete backward equation, restricted to the
// pre-exit nodes; Exit and Cap nodes hold the terminal value with z = 0.
struct DiscreteSolution {
  LatticeSpec spec;
  StoppingRule rule;
  int depth = 0;          // solved steps, clock_step(rule.cap, n)
  int barrier_index = 0;  // smallest exceeding |j| (depth + 1 if unreachable)
  LatticeLayout layout;
  Eigen::VectorXd y;
  Eigen::VectorXd z;  // stage-k value, measurable at step k, applied on (k, k+1]
  std::vector<NodeKind> kinds;

  int n() const { return spec.n; }
  double y0() const { return y[layout.index(0, 0)]; }
  double y_at(int k, int j) const { return y[layout.index(k, j)]; }
  double z_at(int k, int j) const { return z[layout.index(k, j)]; }
  NodeKind kind_at(int k, int j) const { return kinds[layout.index(k, j)]; }
};

// Backward induction solving the discrete equation; requires n > K.
DiscreteSolution backward_solve(const LatticeSpec& spec, const Generator& gen,
                                const TerminalCondition& terminal, const StoppingRule& rule,
                                const NodeSolveConfig& cfg = {});

// Solution quantities read along one increment sequence: y, z, the
// compensated martingale M = y + int f dA^n, its quadratic variation and the
// z-quadrature, plus the residuals of the one-step identities.
struct PathTrace {
  Eigen::VectorXd y;                // k = 0..depth
  Eigen::VectorXd z;                // k = 0..depth-1
  Eigen::VectorXd martingale;       // k = 0..depth
  Eigen::VectorXd driver_integral;  // k = 0..depth
  Eigen::VectorXd qv;               // [M] at k
  Eigen::VectorXd z_quadrature;     // int |z|^2 dA^n at k
  long long exit_step = 0;
  bool capped = false;
  double xi = 0.0;
  double eq2_residual = 0.0;       // max over steps and both branches
  double child_avg_residual = 0.0; // max |M_k - (M_up + M_dn)/2|
  double qv_residual = 0.0;        // max |[M]_k - int |z|^2 dA^n_k|
};

PathTrace trace_path(const DiscreteSolution& sol, const Generator& gen,
                     const Eigen::VectorXi& increments);

// Worst-case residuals over sampled (or exhaustively enumerated) paths.
struct IdentityResiduals {
  double eq2 = 0.0;
  double child_avg = 0.0;
  double qv = 0.0;
  double freeze_y = 0.0;  // max |y_k - xi| after the exit step
  double freeze_z = 0.0;  // max |z_k| after the exit step
};

IdentityResiduals identity_residuals_sampled(const DiscreteSolution& sol, const Generator& gen,
                                             int path_count, std::uint64_t seed);
IdentityResiduals identity_residuals_enumerated(const DiscreteSolution& sol,
                                                const Generator& gen);

// Both sides of the stopped-integral relation
//   int_0^{t^tau} f ds = int_0^t f(s^tau) ds + (tau^t - t) f(tau)
// for a step integrand on the 1/n grid (f_samples[k] on [k/n, (k+1)/n)).
struct StoppedIntegralPair {
  double stopped_integral = 0.0;
  double integral_of_stopped = 0.0;
};

StoppedIntegralPair stopped_integral_identity(const Eigen::VectorXd& f_samples, double tau,
                                              double t, int n);

// +/-1 increment vector for path sampling.
Eigen::VectorXi random_increments(long long steps, std::uint64_t seed, std::uint64_t stream);

// Visits every increment sequence of the given depth (depth <= 24).
void for_each_increment_sequence(int depth,
                                 const std::function<void(const Eigen::VectorXi&)>& fn);

}  // namespace bsde
