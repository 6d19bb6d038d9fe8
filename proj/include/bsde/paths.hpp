#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

namespace bsde {

// Spatial step of the scaled walk, 1/sqrt(n). All lattice positions and walk
// values are formed as integer * walk_scale(n) so that barrier comparisons
// see bit-identical doubles everywhere.
double walk_scale(int n);

// Position of signed lattice index j at scale n.
inline double lattice_position(int j, int n) { return static_cast<double>(j) * walk_scale(n); }

struct WalkParams {
  int n = 1;             // steps per unit time; spatial step 1/sqrt(n)
  int horizon_T = 1;     // integer time horizon; the walk has n*horizon_T steps
  std::uint64_t seed = 0;
};

// Total step count n*horizon_T, validated against overflow.
long long total_steps(const WalkParams& params);

struct WalkPath {
  WalkParams params;
  Eigen::VectorXi increments;  // +/-1, size n*horizon_T
  Eigen::VectorXd values;      // size n*horizon_T + 1; values[k] = S_k / sqrt(n)

  double dt() const { return 1.0 / params.n; }
  double step_size() const { return walk_scale(params.n); }
  long long steps() const { return increments.size(); }
};

// Scaled random walk from i.i.d. symmetric +/-1 increments. Deterministic in
// (params.seed, stream); stream selects an independent path of a batch.
WalkPath build_walk(const WalkParams& params, std::uint64_t stream = 0);

// Walk with caller-supplied increments (enumeration oracles, forced-RNG tests).
WalkPath walk_from_increments(const WalkParams& params, const Eigen::VectorXi& increments);

// Largest integer k >= 0 with k/n <= t, where k/n is evaluated in double
// arithmetic; exact on grid arguments t = k/n. Negative t is a domain error.
long long clock_step(double t, int n);

// The walk clock A^n(t) = [nt]/n.
double clock_An(double t, int n);

// Recombining state space of the scaled walk: node (k, j) has time index k
// and signed position index j, reachable iff |j| <= k and j = k (mod 2).
struct Lattice {
  int n = 1;
  int depth = 0;

  double position(int j) const { return lattice_position(j, n); }
  static bool reachable(int k, int j) {
    return k >= 0 && std::abs(j) <= k && ((j + k) % 2 == 0);
  }
  int nodes_at(int k) const { return k + 1; }
};

// Brownian sample on a fixed increasing grid starting at 0.
struct FinePath {
  Eigen::VectorXd grid;    // increasing, grid[0] = 0
  Eigen::VectorXd values;  // values[0] = 0
  std::uint64_t seed = 0;
};

// Brownian path on the uniform grid {0, mesh, 2*mesh, ...} covering [0, horizon].
FinePath sample_brownian(double horizon, double mesh, std::uint64_t seed,
                         std::uint64_t stream = 0);

// Indices of the subdivision points inside grid. Every subdivision point must
// be a grid point (exact match); anything else is an alignment error.
std::vector<Eigen::Index> subdivision_indices(const Eigen::VectorXd& grid,
                                              const Eigen::VectorXd& subdivision);

// Piecewise-constant discretization: value at t is the path value at the
// largest subdivision point <= t. The output lives on the same fine grid.
FinePath discretize(const FinePath& path, const Eigen::VectorXd& subdivision);

// Predictable clock of a discrete driver: [nt]/n for a scaled walk, the last
// subdivision point <= t for a discretized Brownian motion.
class ProcessClock {
 public:
  static ProcessClock walk(int n);
  static ProcessClock discretized(Eigen::VectorXd subdivision);

  double operator()(double t) const;
  // Largest clock jump; the a_n term of the (H1)(ii) modulus bound.
  double mesh() const;

 private:
  ProcessClock() = default;
  int n_ = 0;                     // > 0 for the walk clock
  Eigen::VectorXd subdivision_;   // used when n_ == 0
};

inline double bracket(const ProcessClock& clock, double t) { return clock(t); }

// Modulus data of hypothesis (H1)(ii): <W^n>_t - <W^n>_s <= rho(t-s) + a_n.
struct BracketModulus {
  std::function<double(double)> rho;  // nondecreasing, rho(0+) = 0
  std::vector<double> a_n;            // nonincreasing, tending to 0
};

// Checks the modulus bound on random pairs 0 <= s <= t <= horizon.
bool modulus_bound_holds(const ProcessClock& clock, const BracketModulus& modulus,
                         std::size_t level, double horizon, int pairs,
                         std::uint64_t seed, double tol = 1e-12);

}  // namespace bsde
