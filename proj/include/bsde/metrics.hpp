#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "bsde/lattice.hpp"
#include "bsde/oracle.hpp"

namespace bsde {

// Per-scale error functionals against the reference solution.
struct ConvergenceRow {
  int n = 0;
  double Y0_error = 0.0;
  double sup_node_error = 0.0;
  double z_l2_error = 0.0;
  double qv_residual = 0.0;
  double martingale_residual = 0.0;
  double runtime = 0.0;  // seconds; excluded from reproducibility comparisons
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;
};

// Max absolute gap of two paths sampled on a common grid, over [0, L].
double sup_process_distance(const Eigen::VectorXd& grid, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& y, double L);

// Max |y(k, j) - u(position(j))| over interior nodes with k/n <= window_L.
// The window keeps the cap-slice data mismatch (probability-negligible but
// O(1) node-wise) out of the sup.
double sup_node_error(const DiscreteSolution& sol, const ReferenceSolution& ref,
                      double window_L);

// Path-averaged (1/n) sum over active steps up to the first exceedance of
// either barrier (the per-n one or the reference one) of |z - u'(position)|^2.
// The average is exact: node visit probabilities come from a forward pass.
double z_l2_distance(const DiscreteSolution& sol, const ReferenceSolution& ref);

// Worst pathwise identity residuals, sampled.
double qv_residual_metric(const DiscreteSolution& sol, const Generator& gen, int paths,
                          std::uint64_t seed);
double martingale_residual_metric(const DiscreteSolution& sol, const Generator& gen, int paths,
                                  std::uint64_t seed);

// For an f = 0 solution, y(k, j) is the conditional expectation of the
// terminal value; reports the path-mean of sup_k |y - u(position)| over the
// pre-exit window. Expected to shrink as n grows.
double martingale_convergence_diag(const DiscreteSolution& f0_sol, const ReferenceSolution& ref,
                                   int paths, std::uint64_t seed);

// Per-node compensated value y + mean running driver integral, where the mean
// is over paths reaching the node actively (exact forward pass). Equals the
// node martingale when the driver vanishes; serialized by the CLI.
Eigen::VectorXd node_martingale_mean(const DiscreteSolution& sol, const Generator& gen);

}  // namespace bsde
