#pragma once

#include <Eigen/Dense>
#include <functional>

#include "bsde/generators.hpp"
#include "bsde/lattice.hpp"
#include "bsde/stopping.hpp"

namespace bsde {

// Reference value function on [-a, a]: u solves (1/2) u'' + f(u, u') = 0 with
// Dirichlet data u(+-a) = g(+-a). Along the driving path, Y_t = u(W_{t^tau})
// and Z_t = u'(W_{t^tau}).
struct ReferenceSolution {
  Eigen::VectorXd grid;
  Eigen::VectorXd u;
  Eigen::VectorXd u_prime;
  double a = 1.0;
  double residual = 0.0;  // final max-norm residual of the discretized system

  double eval(double x) const;
  double eval_prime(double x) const;
};

// Finite-difference solve via damped Newton with finite-difference driver
// derivatives. The generator is evaluated at t = 0 and must be
// time-independent. grid_size is the number of intervals (>= 8).
ReferenceSolution solve_bvp(const Generator& gen, const std::function<double(double)>& g,
                            double a, int grid_size, double residual_tol = 1e-10,
                            int max_newton = 50);

// Exact expectation of a path functional over all 2^depth increment
// sequences of a scaled walk (depth <= 24). The walk handed to the
// functional carries `depth` meaningful steps.
double enumerate_path_expectation(int n, int depth,
                                  const std::function<double(const WalkPath&)>& functional);

// Exhaustive-tree value of the discrete backward equation: the same node
// solve applied over the non-recombining binary tree (depth <= 24).
double enumerate_backward_value(int n, const Generator& gen, const TerminalCondition& terminal,
                                const StoppingRule& rule, const NodeSolveConfig& cfg = {});

// E[g(exit state)] over all increment sequences, via the stopping module.
double enumerate_exit_expectation(int n, const TerminalCondition& terminal,
                                  const StoppingRule& rule);

// Closed form for f = 0: Brownian motion exits [-a, a] at +-a with
// probability 1/2 each.
double exit_value_expectation(const std::function<double(double)>& g, double a);

}  // namespace bsde
