#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bsde/errors.hpp"
#include "bsde/lsmc.hpp"
#include "bsde/oracle.hpp"
#include "bsde/rng.hpp"

using namespace bsde;

namespace {

StoppingRule open_rule(double cap) {
  // Barrier far out of reach: the terminal time is the deterministic cap.
  return {1e9, 1e9, cap, true};
}

}  // namespace

TEST_CASE("basis construction") {
  Eigen::VectorXd states(3);
  states << -1.0, 0.0, 2.0;
  const Eigen::MatrixXd poly = basis_matrix(make_basis("poly:2"), states);
  CHECK(poly.cols() == 3);
  CHECK(poly(2, 2) == 4.0);
  CHECK(poly.col(0).sum() == 3.0);
  const Eigen::MatrixXd bins = basis_matrix(make_basis("bins:4"), states);
  CHECK(bins.cols() == 4);
  for (int i = 0; i < 3; ++i) CHECK(bins.row(i).sum() == 1.0);
  CHECK_THROWS_AS(make_basis("poly"), std::invalid_argument);
  CHECK_THROWS_AS(make_basis("spline:3"), std::invalid_argument);
}

TEST_CASE("batch simulation is reproducible and discretizes exactly") {
  const Eigen::VectorXd times = uniform_subdivision(1.0, 0.125);
  const PathBatch a = simulate_brownian_batch(times, 16, 404);
  const PathBatch b = simulate_brownian_batch(times, 16, 404);
  CHECK(a.values == b.values);
  Eigen::VectorXd coarse(3);
  coarse << 0.0, 0.5, 1.0;
  const PathBatch c = discretize_batch(a, coarse);
  CHECK(c.values.col(1) == a.values.col(4));
  CHECK(c.values.col(2) == a.values.col(8));
}

TEST_CASE("terminal value inside the span is reproduced exactly") {
  // xi = W_T with a linear basis: Y_t = W_t, Z = 1, N = 0 up to QR rounding.
  const Eigen::VectorXd times = uniform_subdivision(1.0, 1.0 / 16);
  const PathBatch batch = simulate_brownian_batch(times, 600, 77);
  const McSolution sol = lsmc_solve(batch, open_rule(1.0), make_generator("zero"),
                                    make_terminal("identity"), make_basis("poly:1"));
  for (int k = 0; k <= sol.cap_index; ++k)
    CHECK((sol.Y.col(k) - batch.values.col(k)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((sol.Z.array() - 1.0).abs().maxCoeff() < 1e-10);
  CHECK(sol.dN.cwiseAbs().maxCoeff() < 1e-10);
  CHECK(sol.n_s2_norm < 1e-10);
  CHECK(std::abs(sol.y0) < 1e-10);
}

TEST_CASE("constant terminal value collapses to the constant") {
  const Eigen::VectorXd times = uniform_subdivision(1.0, 0.25);
  const PathBatch batch = simulate_brownian_batch(times, 64, 99);
  const McSolution sol = lsmc_solve(batch, open_rule(1.0), make_generator("zero"),
                                    terminal_constant(2.0), make_basis("poly:2"));
  CHECK((sol.Y.array() - 2.0).abs().maxCoeff() < 1e-12);
  CHECK(sol.Z.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(sol.dN.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(sol.y0 == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("paths freeze at the barrier exit") {
  const Eigen::VectorXd times = uniform_subdivision(2.0, 0.125);
  const PathBatch batch = simulate_brownian_batch(times, 256, 1234);
  StoppingRule rule{0.5, 0.5, 2.0, true};
  const McSolution sol = lsmc_solve(batch, rule, make_generator("linear:-1,0,0"),
                                    make_terminal("exp"), make_basis("poly:3"));
  int stopped_paths = 0;
  for (int i = 0; i < sol.path_count; ++i) {
    const int s = sol.stop_index[i];
    if (s < sol.cap_index) {
      ++stopped_paths;
      CHECK(std::abs(batch.values(i, s)) > rule.barrier_an);
      for (int k = s; k <= sol.cap_index; ++k) CHECK(sol.Y(i, k) == sol.xi[i]);
      for (int k = s; k < sol.cap_index; ++k) {
        CHECK(sol.Z(i, k) == 0.0);
        CHECK(sol.dN(i, k) == 0.0);
      }
      // No earlier exceedance.
      for (int k = 1; k < s; ++k) CHECK_FALSE(std::abs(batch.values(i, k)) > rule.barrier_an);
    }
  }
  CHECK(stopped_paths > 0);
}

TEST_CASE("residuals are orthogonal to the regressors step by step") {
  const Eigen::VectorXd times = uniform_subdivision(1.0, 1.0 / 8);
  const PathBatch batch = simulate_brownian_batch(times, 512, 31);
  StoppingRule rule{0.8, 0.8, 1.0, true};
  const McSolution sol = lsmc_solve(batch, rule, make_generator("linear:-1,0,0"),
                                    make_terminal("exp"), make_basis("poly:2"));
  CHECK(sol.orth_residual.maxCoeff() < 1e-10);
  CHECK(sol.proj_residual.maxCoeff() < 1e-10);
}

TEST_CASE("rank and contraction guards") {
  // Two clusters of states leave interior bins empty: a genuinely singular
  // design with plenty of rows.
  PathBatch clustered;
  clustered.times = uniform_subdivision(1.0, 0.5);
  clustered.values.setZero(16, 3);
  for (int i = 0; i < 16; ++i) {
    clustered.values(i, 1) = (i % 2 ? 0.9 : -0.9) + 1e-3 * i;
    clustered.values(i, 2) = clustered.values(i, 1);
  }
  CHECK_THROWS_AS(lsmc_solve(clustered, open_rule(1.0), make_generator("zero"),
                             make_terminal("identity"), make_basis("bins:8")),
                  RankError);
  const Eigen::VectorXd times = uniform_subdivision(1.0, 0.5);
  const PathBatch batch = simulate_brownian_batch(times, 64, 3);
  CHECK_THROWS_AS(lsmc_solve(batch, open_rule(1.0), make_generator("linear:-3,0,0"),
                             make_terminal("identity"), make_basis("poly:1")),
                  ContractionError);
}

TEST_CASE("thin active tails degrade the basis instead of failing") {
  const Eigen::VectorXd times = uniform_subdivision(1.0, 0.5);
  const PathBatch tiny = simulate_brownian_batch(times, 6, 3);
  const McSolution sol = lsmc_solve(tiny, open_rule(1.0), make_generator("zero"),
                                    make_terminal("identity"), make_basis("poly:4"));
  CHECK(sol.degraded_steps > 0);
}

TEST_CASE("nonlinear solve tracks the reference value") {
  const Generator gen = make_generator("linear:-1,0,0");
  const TerminalCondition expo = make_terminal("exp");
  const ReferenceSolution ref = solve_bvp(gen, [](double x) { return std::exp(x); }, 1.0, 256);
  const Eigen::VectorXd times = uniform_subdivision(4.0, 1.0 / 16);
  const PathBatch batch = simulate_brownian_batch(times, 20000, 2025);
  StoppingRule rule{1.0, 1.0, 4.0, true};
  LsmcOptions opts;
  opts.store_y = opts.store_z = opts.store_dn = false;
  const McSolution sol = lsmc_solve(batch, rule, gen, expo, make_basis("poly:4"), opts);
  const double u0 = ref.eval(0.0);
  CHECK(std::abs(sol.y0 - u0) < 0.1 * std::abs(u0));
  const double stderr_y0 = lsmc_y0_bootstrap_stderr(batch, rule, gen, expo, make_basis("poly:4"),
                                                    4, 99, opts);
  CHECK(stderr_y0 > 0.0);
  CHECK(stderr_y0 < 0.05);
}

TEST_CASE("decomposition study: constants give zero discrepancies") {
  const Eigen::VectorXd fine_times = uniform_subdivision(1.0, 1.0 / 32);
  const PathBatch fine = simulate_brownian_batch(fine_times, 128, 9);
  std::vector<Eigen::VectorXd> subs = {uniform_subdivision(1.0, 1.0 / 8),
                                       uniform_subdivision(1.0, 1.0 / 32)};
  const DecompositionReport report = decomposition_stability(
      fine, subs, {1e9, 1e9}, 1.0, terminal_constant(1.5), make_basis("poly:1"));
  for (const auto& level : report.levels) {
    CHECK(level.m_sup_discrepancy < 1e-12);
    CHECK(level.z_clock_integral < 1e-20);
    CHECK(level.n_s2_norm < 1e-12);
  }
}

TEST_CASE("decomposition study: representable terminal has no orthogonal part") {
  const Eigen::VectorXd fine_times = uniform_subdivision(1.0, 1.0 / 32);
  const PathBatch fine = simulate_brownian_batch(fine_times, 256, 10);
  std::vector<Eigen::VectorXd> subs = {uniform_subdivision(1.0, 1.0 / 8),
                                       uniform_subdivision(1.0, 1.0 / 16),
                                       uniform_subdivision(1.0, 1.0 / 32)};
  const DecompositionReport report = decomposition_stability(
      fine, subs, {1e9, 1e9, 1e9}, 1.0, make_terminal("identity"), make_basis("poly:1"));
  for (const auto& level : report.levels) CHECK(level.n_s2_norm < 1e-9);
  // The discretized conditional-expectation processes refine toward the
  // finest level.
  CHECK(report.levels[0].m_sup_discrepancy >= report.levels[1].m_sup_discrepancy);
  CHECK(report.levels[2].m_sup_discrepancy < 1e-10);
}

TEST_CASE("decomposition study: barrier terminal values refine monotonically") {
  // g = exp at the exit of [-a^n, a^n] with a^n decreasing to a: the
  // orthogonal part and the gap to the finest level both shrink.
  const double cap = 2.0;
  const Eigen::VectorXd fine_times = uniform_subdivision(cap, 1.0 / 64);
  const PathBatch fine = simulate_brownian_batch(fine_times, 2048, 314);
  std::vector<Eigen::VectorXd> subs = {uniform_subdivision(cap, 1.0 / 8),
                                       uniform_subdivision(cap, 1.0 / 16),
                                       uniform_subdivision(cap, 1.0 / 64)};
  const std::vector<double> barriers = {0.6 + 1.0 / 8, 0.6 + 1.0 / 16, 0.6 + 1.0 / 64};
  const DecompositionReport report = decomposition_stability(
      fine, subs, barriers, cap, make_terminal("exp"), make_basis("poly:3"));
  REQUIRE(report.levels.size() == 3);
  CHECK(report.levels[1].m_sup_discrepancy < report.levels[0].m_sup_discrepancy);
  CHECK(report.levels[2].m_sup_discrepancy == 0.0);  // reference level
  CHECK(report.levels[2].n_s2_norm < report.levels[0].n_s2_norm);
  CHECK(report.levels[1].z_integral_gap < report.levels[0].z_integral_gap);
}

TEST_CASE("bracket of the stopped clock: degenerate taus") {
  const Eigen::VectorXd sub = uniform_subdivision(2.0, 0.25);
  Eigen::VectorXd eval = uniform_subdivision(2.5, 0.1);
  const BracketPair at_zero = bracket_stopped_identity(sub, 0.0, eval);
  CHECK(at_zero.max_gap == 0.0);
  CHECK(at_zero.lhs.cwiseAbs().maxCoeff() == 0.0);
  const BracketPair beyond = bracket_stopped_identity(sub, 5.0, eval);
  CHECK(beyond.max_gap == 0.0);
  CHECK(beyond.lhs[eval.size() - 1] == 2.0);  // unstopped bracket at the horizon
}

TEST_CASE("bracket of the stopped clock on random grid taus") {
  SplitMix64 rng(61);
  const Eigen::VectorXd sub = uniform_subdivision(2.0, 1.0 / 16);
  Eigen::VectorXd eval = uniform_subdivision(2.2, 0.013);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto idx = static_cast<Eigen::Index>(rng.uniform01() * sub.size());
    const double tau = sub[std::min(idx, sub.size() - 1)];
    worst = std::max(worst, bracket_stopped_identity(sub, tau, eval).max_gap);
  }
  CHECK(worst < 1e-14);
}

TEST_CASE("clock at the stopping time stays within cap plus mesh") {
  // (H1)(iii) at desk scale: <W^n>_{tau^n} <= cap + mesh.
  const Eigen::VectorXd times = uniform_subdivision(2.0, 0.125);
  const PathBatch batch = simulate_brownian_batch(times, 128, 12);
  StoppingRule rule{0.6, 0.6, 2.0, true};
  const McSolution sol = lsmc_solve(batch, rule, make_generator("zero"),
                                    make_terminal("exp"), make_basis("poly:2"));
  const ProcessClock clock = ProcessClock::discretized(times);
  for (int i = 0; i < sol.path_count; ++i)
    CHECK(clock(sol.tau[i]) <= rule.cap + clock.mesh());
}
