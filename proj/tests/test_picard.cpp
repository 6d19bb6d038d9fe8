#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bsde/errors.hpp"
#include "bsde/picard.hpp"

using namespace bsde;

TEST_CASE("zeroth iterate is identically zero") {
  const StoppingRule rule = make_lattice_rule(0.5, 4, 2.0);
  const PicardIterate it = picard_zero({4, 2}, rule);
  CHECK(it.p == 0);
  CHECK(it.values.y.cwiseAbs().maxCoeff() == 0.0);
  CHECK(it.values.z.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("one step from zero reproduces the driverless direct solve") {
  const Generator zero = make_generator("zero");
  const TerminalCondition expo = make_terminal("exp");
  const StoppingRule rule = make_lattice_rule(0.5, 4, 2.0);
  const PicardIterate one = picard_step(picard_zero({4, 2}, rule), zero, expo);
  const DiscreteSolution direct = backward_solve({4, 2}, zero, expo, rule);
  CHECK(picard_gap(one.values, direct) == 0.0);
}

TEST_CASE("zero terminal and zero driver converge at the first sweep") {
  const Generator zero = make_generator("zero");
  const TerminalCondition nil = terminal_constant(0.0);
  const StoppingRule rule = make_lattice_rule(0.5, 4, 2.0);
  const PicardResult result = picard_solve({4, 2}, zero, nil, rule, 60, 1e-12);
  CHECK(result.converged);
  CHECK(result.iterations_used == 1);
  CHECK(result.iterate.values.y.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("constant driver converges at the second sweep") {
  const Generator gen = make_generator("constant:0.5");
  const TerminalCondition nil = terminal_constant(0.0);
  const StoppingRule rule = make_lattice_rule(0.5, 4, 2.0);
  const PicardResult result = picard_solve({4, 2}, gen, nil, rule, 60, 1e-12);
  CHECK(result.converged);
  CHECK(result.iterations_used == 2);
}

TEST_CASE("iterate gaps to the direct solve decay geometrically at 2K/n for n = 8K") {
  // The per-sweep decay rate tracks the expected active residence, so the
  // 2K/n bound holds in the cumulative (geometric-mean) sense at n = 8K.
  const Generator gen = make_generator("linear:-1,0,0");
  const TerminalCondition expo = make_terminal("exp");
  const int n = 8;
  const StoppingRule rule = make_lattice_rule(0.5, n, 1.0);
  const DiscreteSolution direct = backward_solve({n, 1}, gen, expo, rule, {1e-15, 500, 0.0});

  PicardIterate it = picard_zero({n, 1}, rule);
  std::vector<double> gaps;
  for (int p = 1; p <= 40; ++p) {
    it = picard_step(it, gen, expo);
    gaps.push_back(picard_gap(it.values, direct));
    if (gaps.back() < 1e-11) break;
  }
  for (std::size_t p = 1; p < gaps.size(); ++p) CHECK(gaps[p] <= gaps[p - 1]);
  const double geo =
      std::pow(gaps.back() / gaps.front(), 1.0 / static_cast<double>(gaps.size() - 1));
  CHECK(geo <= 2.0 * gen.lipschitz_K / n);
  CHECK(gaps.back() < 1e-10);
}

TEST_CASE("small-lattice iteration still converges, just at its own rate") {
  const Generator gen = make_generator("linear:-1,0,0");
  const TerminalCondition expo = make_terminal("exp");
  const StoppingRule rule = make_lattice_rule(0.5, 4, 2.0);
  const DiscreteSolution direct = backward_solve({4, 2}, gen, expo, rule, {1e-15, 500, 0.0});
  PicardIterate it = picard_zero({4, 2}, rule);
  double first = 0.0, last = 0.0;
  for (int p = 1; p <= 25; ++p) {
    it = picard_step(it, gen, expo);
    last = picard_gap(it.values, direct);
    if (p == 1) first = last;
  }
  CHECK(last < 1e-6 * first);
}

TEST_CASE("successive changes contract geometrically with the z term absorbed") {
  const Generator gen = make_generator("linear+sin-z:-1,0,0");
  const TerminalCondition expo = make_terminal("exp");
  const int n = 8;
  const StoppingRule rule = make_lattice_rule(0.5, n, 1.0);
  PicardIterate curr = picard_step(picard_zero({n, 1}, rule), gen, expo);
  PicardIterate prev = picard_zero({n, 1}, rule);
  double first_change = picard_gap(curr.values, prev.values);
  double change = first_change;
  int sweeps = 0;
  for (int p = 2; p <= 40; ++p) {
    PicardIterate next = picard_step(curr, gen, expo);
    change = picard_gap(next.values, curr.values);
    prev = std::move(curr);
    curr = std::move(next);
    sweeps = p - 1;
    if (change < 1e-12) break;
  }
  const double geo = std::pow(change / first_change, 1.0 / sweeps);
  CHECK(geo <= 2.0 * gen.lipschitz_K / n);
}

TEST_CASE("picard limit satisfies the direct equation") {
  const Generator gen = make_generator("linear+sin-z:-1,0,0");
  const TerminalCondition expo = make_terminal("exp");
  const int n = 16;
  const StoppingRule rule = make_lattice_rule(0.5, n, 2.0);
  const double tol = 1e-12;
  const PicardResult result = picard_solve({n, 2}, gen, expo, rule, 60, tol);
  CHECK(result.converged);
  const DiscreteSolution direct = backward_solve({n, 2}, gen, expo, rule);
  const double bound = tol / (1.0 - gen.lipschitz_K / n);
  CHECK(picard_gap(result.iterate.values, direct) <= bound);
  CHECK(picard_gap(result.iterate.values, direct) < 1e-10);

  // The limit also passes the one-step residual check of the direct scheme.
  const IdentityResiduals res = identity_residuals_sampled(direct, gen, 64, 7);
  CHECK(res.eq2 < 1e-12);
}

TEST_CASE("exhausting p_max reports non-convergence with the achieved gap") {
  const Generator gen = make_generator("linear:-1,0,1");
  const TerminalCondition expo = make_terminal("exp");
  const StoppingRule rule = make_lattice_rule(0.5, 8, 2.0);
  const PicardResult result = picard_solve({8, 2}, gen, expo, rule, 1, 1e-12);
  CHECK_FALSE(result.converged);
  CHECK(result.iterations_used == 1);
  CHECK(result.final_change > 0.0);
}

TEST_CASE("picard rejects n <= K") {
  const Generator stiff = make_generator("linear:-8,0,0");
  const TerminalCondition expo = make_terminal("exp");
  CHECK_THROWS_AS(picard_solve({8, 1}, stiff, expo, make_lattice_rule(0.5, 8, 1.0), 10, 1e-10),
                  ContractionError);
}
