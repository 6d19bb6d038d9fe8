#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bsde/errors.hpp"
#include "bsde/lattice.hpp"
#include "bsde/oracle.hpp"
#include "bsde/rng.hpp"

using namespace bsde;

TEST_CASE("conditional z on symmetric branches") {
  CHECK(lattice_conditional_z(1.0, -1.0, 1, true) == 1.0);
  CHECK(lattice_conditional_z(3.5, 3.5, 16, true) == 0.0);
  CHECK(lattice_conditional_z(3.0, 1.0, 4, true) == 2.0);
  CHECK(lattice_conditional_z(3.0, 1.0, 4, false) == 0.0);
  // sqrt(n) * sum over eps of y(eps) * eps * (1/2), enumerated.
  const double enumerated = std::sqrt(4.0) * 0.5 * (3.0 * 1.0 + 1.0 * -1.0);
  CHECK(lattice_conditional_z(3.0, 1.0, 4, true) == enumerated);
}

TEST_CASE("node solve without driver returns the mean") {
  const Generator zero = make_generator("zero");
  CHECK(solve_node_y(0.75, 1.0, 0.0, zero, 4, {}) == 0.75);
}

TEST_CASE("node solve matches the linear closed form") {
  // y = m + (-y)/n  =>  y = m * n / (n + 1).
  const Generator gen = make_generator("linear:-1,0,0");
  const double y = solve_node_y(1.0, 0.0, 0.0, gen, 2, {});
  CHECK(y == doctest::Approx(2.0 / 3.0).epsilon(1e-13));
}

TEST_CASE("node solve rejects K/n >= 1") {
  const Generator gen = make_generator("linear:-1,0,0");
  CHECK_THROWS_AS(solve_node_y(1.0, 0.0, 0.0, gen, 1, {}), ContractionError);
}

TEST_CASE("node solve matches a bisection oracle for sin drivers") {
  Generator gen;
  gen.eval = [](double, double y, double) { return std::sin(y); };
  gen.lipschitz_K = 1.0;
  const int n = 10;
  const double solved = solve_node_y(1.0, 0.0, 0.0, gen, n, {1e-15, 500, 0.0});
  double lo = 0.0, hi = 3.0;  // g(y) = y - 1 - sin(y)/10 brackets a root here
  auto g = [n](double y) { return y - 1.0 - std::sin(y) / n; };
  REQUIRE(g(lo) < 0.0);
  REQUIRE(g(hi) > 0.0);
  while (hi - lo > 1e-13) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) < 0.0 ? lo : hi) = mid;
  }
  CHECK(solved == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-12));
}

TEST_CASE("node solve reports non-convergence") {
  Generator gen;
  gen.eval = [](double, double y, double) { return std::sin(y * 1e8); };
  gen.lipschitz_K = 1.0;  // understated on purpose; the map oscillates
  NodeSolveConfig cfg;
  cfg.max_iters = 3;
  CHECK_THROWS_AS(solve_node_y(1.0, 0.0, 0.0, gen, 2, cfg), SolverError);
}

TEST_CASE("constant terminal with zero driver solves to the constant") {
  const Generator zero = make_generator("zero");
  const TerminalCondition xi = terminal_constant(2.5);
  const StoppingRule rule = make_lattice_rule(0.5, 8, 2.0);
  const DiscreteSolution sol = backward_solve({8, 2}, zero, xi, rule);
  CHECK((sol.y.array() == 2.5).all());
  CHECK((sol.z.array() == 0.0).all());
  CHECK(sol.y0() == 2.5);
}

TEST_CASE("deterministic horizon with constant driver telescopes the means") {
  // Unreachable barrier, cap T: Y_0 = E[xi] + c*T.
  const int n = 8, T = 2;
  const Generator gen = make_generator("constant:0.375");
  StoppingRule rule{1e9, 1e9, static_cast<double>(T), true};

  const TerminalCondition identity = make_terminal("identity");
  const DiscreteSolution sol_id = backward_solve({n, T}, gen, identity, rule);
  CHECK(std::abs(sol_id.y0() - 0.375 * T) < 1e-12);

  const TerminalCondition expo = make_terminal("exp");
  const DiscreteSolution sol_exp = backward_solve({n, T}, gen, expo, rule);
  const double mean_exp = std::pow(std::cosh(walk_scale(n)), n * T);
  CHECK(std::abs(sol_exp.y0() - (mean_exp + 0.375 * T)) < 1e-12);
}

TEST_CASE("backward solve agrees with the exhaustive tree") {
  const TerminalCondition expo = make_terminal("exp");
  for (const char* spec : {"zero", "constant:0.5", "linear:-1,0,0", "linear+sin-z:-1,0,0"}) {
    const Generator gen = make_generator(spec);
    const StoppingRule rule = make_lattice_rule(0.5, 4, 2.0);
    const DiscreteSolution sol = backward_solve({4, 2}, gen, expo, rule);
    const double tree = enumerate_backward_value(4, gen, expo, rule);
    CHECK(std::abs(sol.y0() - tree) < 1e-12);
  }
}

TEST_CASE("zero-driver root value equals the raw exit average") {
  const Generator zero = make_generator("zero");
  const TerminalCondition expo = make_terminal("exp");
  const StoppingRule rule = make_lattice_rule(0.5, 4, 3.0);
  const DiscreteSolution sol = backward_solve({4, 3}, zero, expo, rule);
  const double enumerated = enumerate_exit_expectation(4, expo, rule);
  CHECK(std::abs(sol.y0() - enumerated) < 1e-12);
}

TEST_CASE("pathwise identities hold at machine precision") {
  SplitMix64 rng(2718);
  const TerminalCondition expo = make_terminal("exp");
  for (int trial = 0; trial < 12; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform01() * 6);
    const int cap = 1 + static_cast<int>(rng.uniform01() * 2);
    const double a = 0.25 + 0.5 * rng.uniform01();
    const Generator gen = make_generator(trial % 2 ? "linear:-1,0,1" : "linear+sin-z:-1,0,0");
    if (gen.lipschitz_K >= n) continue;
    const StoppingRule rule = make_lattice_rule(a, n, cap);
    const DiscreteSolution sol = backward_solve({n, cap}, gen, expo, rule);
    const IdentityResiduals res = sol.depth <= 10
                                      ? identity_residuals_enumerated(sol, gen)
                                      : identity_residuals_sampled(sol, gen, 200, rng());
    CHECK(res.eq2 < 1e-12);
    CHECK(res.child_avg < 1e-12);
    CHECK(res.qv < 1e-12);
    CHECK(res.freeze_y == 0.0);
    CHECK(res.freeze_z == 0.0);
  }
}

TEST_CASE("martingale equals y when the driver vanishes") {
  const Generator zero = make_generator("zero");
  const TerminalCondition expo = make_terminal("exp");
  const StoppingRule rule = make_lattice_rule(0.75, 4, 2.0);
  const DiscreteSolution sol = backward_solve({4, 2}, zero, expo, rule);
  // Node values are child averages on interior nodes.
  for (int k = 0; k < sol.depth; ++k) {
    for (int j = sol.layout.j_lo(k); j <= sol.layout.j_hi(k); j += 2) {
      if (sol.kind_at(k, j) != NodeKind::Interior) continue;
      const double avg = 0.5 * (sol.y_at(k + 1, j + 1) + sol.y_at(k + 1, j - 1));
      CHECK(std::abs(sol.y_at(k, j) - avg) < 1e-14);
    }
  }
  const PathTrace trace = trace_path(sol, zero, random_increments(sol.depth, 9, 9));
  CHECK((trace.martingale - trace.y).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("constant terminal with compatible driver keeps M constant") {
  // f(t, c, 0) = 0 for f = -y + 1 and c = 1.
  const Generator gen = make_generator("linear:-1,0,1");
  const TerminalCondition xi = terminal_constant(1.0);
  const StoppingRule rule = make_lattice_rule(0.5, 8, 2.0);
  const DiscreteSolution sol = backward_solve({8, 2}, gen, xi, rule);
  const PathTrace trace = trace_path(sol, gen, random_increments(sol.depth, 33, 1));
  CHECK((trace.martingale.array() - 1.0).abs().maxCoeff() < 1e-13);
}

TEST_CASE("solution is unique across fixed-point initializations") {
  const Generator gen = make_generator("linear+sin-z:-1,0.5,0.25");
  const TerminalCondition expo = make_terminal("exp");
  const StoppingRule rule = make_lattice_rule(0.5, 8, 2.0);
  NodeSolveConfig up, down;
  up.init_offset = 1.0;
  down.init_offset = -1.0;
  const DiscreteSolution a = backward_solve({8, 2}, gen, expo, rule, up);
  const DiscreteSolution b = backward_solve({8, 2}, gen, expo, rule, down);
  CHECK((a.y - b.y).cwiseAbs().maxCoeff() <= 10 * NodeSolveConfig{}.fixed_point_tol);
}

TEST_CASE("solver preconditions") {
  const TerminalCondition expo = make_terminal("exp");
  const Generator stiff = make_generator("linear:-8,0,0");
  CHECK_THROWS_AS(backward_solve({8, 1}, stiff, expo, make_lattice_rule(0.5, 8, 1.0)),
                  ContractionError);
  const Generator zero = make_generator("zero");
  StoppingRule long_cap = make_lattice_rule(0.5, 8, 3.0);
  CHECK_THROWS_AS(backward_solve({8, 2}, zero, expo, long_cap), std::invalid_argument);
  StoppingRule negative = make_lattice_rule(0.5, 8, 1.0);
  negative.barrier_an = -0.25;
  CHECK_THROWS_AS(backward_solve({8, 1}, zero, expo, negative), std::invalid_argument);
}

TEST_CASE("stopped integral identity: no stopping below tau") {
  Eigen::VectorXd f(8);
  f << 1.0, -2.0, 0.5, 3.0, -1.0, 0.25, 2.0, -0.75;
  const StoppedIntegralPair pair = stopped_integral_identity(f, 1.9, 1.5, 4);
  CHECK(pair.stopped_integral == doctest::Approx(pair.integral_of_stopped).epsilon(1e-15));
  // t <= tau: both sides are the plain integral over [0, t].
  double plain = 0.0;
  for (int k = 0; k < 6; ++k) plain += f[k] * 0.25;
  CHECK(pair.stopped_integral == doctest::Approx(plain).epsilon(1e-14));
}

TEST_CASE("stopped integral identity: constant integrand") {
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(3);
  const StoppedIntegralPair pair = stopped_integral_identity(ones, 1.0, 2.0, 1);
  CHECK(pair.stopped_integral == doctest::Approx(1.0));
  CHECK(pair.integral_of_stopped == doctest::Approx(1.0));
}

TEST_CASE("stopped integral identity over random data") {
  SplitMix64 rng(515);
  double worst = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform01() * 8);
    Eigen::VectorXd f(3 * n + 1);
    for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = 2.0 * rng.uniform01() - 1.0;
    const double tau = 3.0 * rng.uniform01();
    const double t = 3.0 * rng.uniform01();
    const StoppedIntegralPair pair = stopped_integral_identity(f, tau, t, n);
    worst = std::max(worst, std::abs(pair.stopped_integral - pair.integral_of_stopped));
  }
  CHECK(worst < 1e-14);
}

TEST_CASE("time-dependent drivers follow the left-endpoint clock") {
  // f(t, y, z) = c*t with an unreachable barrier telescopes exactly:
  // Y_0 = E[xi] + (c/n^2) * sum_{k<nT} k.
  const int n = 8, T = 2;
  const double c = 0.75;
  Generator gen;
  gen.eval = [c](double t, double, double) { return c * t; };
  gen.lipschitz_K = 0.0;
  gen.name = "c*t";
  StoppingRule rule{1e9, 1e9, static_cast<double>(T), true};
  const DiscreteSolution sol = backward_solve({n, T}, gen, make_terminal("identity"), rule);
  const double steps = n * T;
  const double expected = c * (steps - 1.0) * steps / (2.0 * n * n);
  CHECK(std::abs(sol.y0() - expected) < 1e-12);

  // And with stopping, the tree oracle agrees (independent traversal).
  Generator mixed;
  mixed.eval = [](double t, double y, double) { return -y + std::sin(t); };
  mixed.lipschitz_K = 1.0;
  mixed.monotonicity_mu = 1.0;
  mixed.name = "-y+sin(t)";
  const StoppingRule barrier = make_lattice_rule(0.5, 4, 3.0);
  const DiscreteSolution stopped = backward_solve({4, 3}, mixed, make_terminal("exp"), barrier);
  const double tree = enumerate_backward_value(4, mixed, make_terminal("exp"), barrier);
  CHECK(std::abs(stopped.y0() - tree) < 1e-12);
}

TEST_CASE("lattice layout prunes at the absorbing level") {
  const LatticeLayout layout(4, 8, 2, true);
  CHECK(layout.j_hi(5) == 1);  // parity of k = 5
  CHECK(layout.j_hi(6) == 2);
  CHECK(layout.j_lo(6) == -2);
  CHECK(layout.contains(6, 2));
  CHECK_FALSE(layout.contains(6, 4));
  CHECK_FALSE(layout.contains(3, 2));  // parity mismatch
  CHECK_THROWS_AS(layout.index(6, 4), std::out_of_range);
  // Index round trip covers every slice.
  for (int k = 0; k <= layout.depth(); ++k) {
    Eigen::Index expected = layout.index(k, layout.j_lo(k));
    for (int j = layout.j_lo(k); j <= layout.j_hi(k); j += 2) {
      CHECK(layout.index(k, j) == expected);
      ++expected;
    }
  }
}

TEST_CASE("one-sided rules absorb only above the barrier") {
  const Generator zero = make_generator("zero");
  const TerminalCondition id = make_terminal("identity");
  StoppingRule rule{0.5, 0.6, 2.0, false};
  const DiscreteSolution sol = backward_solve({4, 2}, zero, id, rule);
  CHECK(sol.layout.j_lo(8) == -8);
  CHECK(sol.layout.j_hi(8) == 2);
  // Root value is the expectation of the one-sided exit state.
  const double enumerated = enumerate_exit_expectation(4, id, rule);
  CHECK(std::abs(sol.y0() - enumerated) < 1e-12);
}

TEST_CASE("pathwise identities hold on one-sided lattices too") {
  const Generator gen = make_generator("linear:-1,0,1");
  const TerminalCondition expo = make_terminal("exp");
  StoppingRule rule{0.5, 0.6, 2.0, false};
  const DiscreteSolution sol = backward_solve({4, 2}, gen, expo, rule);
  const IdentityResiduals res = identity_residuals_enumerated(sol, gen);
  CHECK(res.eq2 < 1e-12);
  CHECK(res.child_avg < 1e-12);
  CHECK(res.qv < 1e-12);
  CHECK(res.freeze_y == 0.0);
  CHECK(res.freeze_z == 0.0);
  // Exit nodes carry the one-sided exit state only.
  for (int k = 1; k <= sol.depth; ++k) {
    for (int j = sol.layout.j_lo(k); j <= sol.layout.j_hi(k); j += 2) {
      if (sol.kind_at(k, j) == NodeKind::Exit) CHECK(j == sol.barrier_index);
    }
  }
}
