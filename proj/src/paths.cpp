#include "bsde/paths.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include "bsde/rng.hpp"

namespace bsde {

double walk_scale(int n) {
  if (n < 1) throw std::invalid_argument("walk_scale: n must be >= 1");
  return 1.0 / std::sqrt(static_cast<double>(n));
}

long long total_steps(const WalkParams& params) {
  if (params.n < 1) throw std::invalid_argument("WalkParams: n must be >= 1");
  if (params.horizon_T < 1) throw std::invalid_argument("WalkParams: horizon_T must be >= 1");
  const long long steps =
      static_cast<long long>(params.n) * static_cast<long long>(params.horizon_T);
  // Values are indexed by Eigen::Index and cumulated in a signed 64-bit sum;
  // cap well below both limits.
  if (steps > (1ll << 32)) throw std::length_error("WalkParams: step count overflow");
  return steps;
}

WalkPath build_walk(const WalkParams& params, std::uint64_t stream) {
  const long long steps = total_steps(params);
  SplitMix64 rng = stream_rng(params.seed, stream);
  Eigen::VectorXi increments(steps);
  for (long long k = 0; k < steps; ++k) increments[k] = rng.sign();
  return walk_from_increments(params, increments);
}

WalkPath walk_from_increments(const WalkParams& params, const Eigen::VectorXi& increments) {
  const long long steps = total_steps(params);
  if (increments.size() != steps)
    throw std::invalid_argument("walk_from_increments: increment count mismatch");
  WalkPath path;
  path.params = params;
  path.increments = increments;
  path.values.resize(steps + 1);
  const double scale = walk_scale(params.n);
  long long sum = 0;
  path.values[0] = 0.0;
  for (long long k = 0; k < steps; ++k) {
    const int eps = increments[k];
    if (eps != 1 && eps != -1)
      throw std::invalid_argument("walk_from_increments: increments must be +/-1");
    sum += eps;
    path.values[k + 1] = static_cast<double>(sum) * scale;
  }
  return path;
}

long long clock_step(double t, int n) {
  if (n < 1) throw std::invalid_argument("clock_step: n must be >= 1");
  if (!(t >= 0.0)) throw std::invalid_argument("clock_step: time must be nonnegative");
  const double nt = static_cast<double>(n) * t;
  if (nt >= 9.0e18) throw std::overflow_error("clock_step: time out of range");
  long long k = static_cast<long long>(std::floor(nt));
  // Snap to the double-precision grid: result is the largest k with
  // fl(k/n) <= t, so grid arguments t = fl(k/n) map to k exactly.
  while (static_cast<double>(k + 1) / n <= t) ++k;
  while (k > 0 && static_cast<double>(k) / n > t) --k;
  return k;
}

double clock_An(double t, int n) {
  return static_cast<double>(clock_step(t, n)) / n;
}

FinePath sample_brownian(double horizon, double mesh, std::uint64_t seed,
                         std::uint64_t stream) {
  if (!(horizon > 0.0)) throw std::invalid_argument("sample_brownian: horizon must be > 0");
  if (!(mesh > 0.0)) throw std::invalid_argument("sample_brownian: mesh must be > 0");
  const auto steps = static_cast<Eigen::Index>(std::ceil(horizon / mesh - 1e-12));
  if (steps < 1 || steps > (1ll << 26))
    throw std::length_error("sample_brownian: grid size out of range");
  FinePath path;
  path.seed = seed;
  path.grid.resize(steps + 1);
  path.values.resize(steps + 1);
  SplitMix64 rng = stream_rng(seed, stream);
  const double sqrt_mesh = std::sqrt(mesh);
  path.grid[0] = 0.0;
  path.values[0] = 0.0;
  for (Eigen::Index k = 1; k <= steps; ++k) {
    path.grid[k] = static_cast<double>(k) * mesh;
    path.values[k] = path.values[k - 1] + sqrt_mesh * rng.gaussian();
  }
  return path;
}

std::vector<Eigen::Index> subdivision_indices(const Eigen::VectorXd& grid,
                                              const Eigen::VectorXd& subdivision) {
  if (grid.size() == 0) throw std::invalid_argument("subdivision_indices: empty grid");
  if (subdivision.size() == 0)
    throw std::invalid_argument("subdivision_indices: empty subdivision");
  std::vector<Eigen::Index> indices;
  indices.reserve(subdivision.size());
  Eigen::Index lo = 0;
  for (Eigen::Index i = 0; i < subdivision.size(); ++i) {
    if (i > 0 && !(subdivision[i] > subdivision[i - 1]))
      throw std::invalid_argument("subdivision_indices: subdivision not increasing");
    const double t = subdivision[i];
    const double* begin = grid.data();
    const double* it = std::lower_bound(begin + lo, begin + grid.size(), t);
    const auto pos = static_cast<Eigen::Index>(it - begin);
    if (pos == grid.size() || grid[pos] != t)
      throw std::invalid_argument("subdivision_indices: subdivision point not on fine grid");
    indices.push_back(pos);
    lo = pos;
  }
  return indices;
}

FinePath discretize(const FinePath& path, const Eigen::VectorXd& subdivision) {
  const auto indices = subdivision_indices(path.grid, subdivision);
  if (subdivision[0] != path.grid[0])
    throw std::invalid_argument("discretize: subdivision must start at the grid origin");
  FinePath out;
  out.grid = path.grid;
  out.seed = path.seed;
  out.values.resize(path.values.size());
  std::size_t next = 1;  // next subdivision index to cross
  double held = path.values[indices[0]];
  for (Eigen::Index i = 0; i < path.grid.size(); ++i) {
    while (next < indices.size() && indices[next] <= i) {
      held = path.values[indices[next]];
      ++next;
    }
    out.values[i] = held;
  }
  return out;
}

ProcessClock ProcessClock::walk(int n) {
  if (n < 1) throw std::invalid_argument("ProcessClock::walk: n must be >= 1");
  ProcessClock clock;
  clock.n_ = n;
  return clock;
}

ProcessClock ProcessClock::discretized(Eigen::VectorXd subdivision) {
  if (subdivision.size() == 0)
    throw std::invalid_argument("ProcessClock::discretized: empty subdivision");
  for (Eigen::Index i = 1; i < subdivision.size(); ++i)
    if (!(subdivision[i] > subdivision[i - 1]))
      throw std::invalid_argument("ProcessClock::discretized: subdivision not increasing");
  ProcessClock clock;
  clock.subdivision_ = std::move(subdivision);
  return clock;
}

double ProcessClock::operator()(double t) const {
  if (!(t >= 0.0)) throw std::invalid_argument("ProcessClock: time must be nonnegative");
  if (n_ > 0) return clock_An(t, n_);
  // Last subdivision point <= t; before the first point the clock is at it.
  const double* begin = subdivision_.data();
  const double* end = begin + subdivision_.size();
  const double* it = std::upper_bound(begin, end, t);
  if (it == begin) return subdivision_[0];
  return *(it - 1);
}

double ProcessClock::mesh() const {
  if (n_ > 0) return 1.0 / n_;
  double mesh = 0.0;
  for (Eigen::Index i = 1; i < subdivision_.size(); ++i)
    mesh = std::max(mesh, subdivision_[i] - subdivision_[i - 1]);
  return mesh;
}

bool modulus_bound_holds(const ProcessClock& clock, const BracketModulus& modulus,
                         std::size_t level, double horizon, int pairs,
                         std::uint64_t seed, double tol) {
  if (level >= modulus.a_n.size())
    throw std::invalid_argument("modulus_bound_holds: level out of range");
  SplitMix64 rng = stream_rng(seed, 0xb0);
  const double a_n = modulus.a_n[level];
  for (int i = 0; i < pairs; ++i) {
    double s = horizon * rng.uniform01();
    double t = horizon * rng.uniform01();
    if (s > t) std::swap(s, t);
    if (clock(t) - clock(s) > modulus.rho(t - s) + a_n + tol) return false;
  }
  return true;
}

}  // namespace bsde
