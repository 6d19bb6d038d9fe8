#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "bsde/generators.hpp"
#include "bsde/lattice.hpp"
#include "bsde/stopping.hpp"

namespace bsde {

// Basis of state functions used for the per-step conditional expectations.
struct RegressionBasis {
  enum class Kind { Polynomial, IndicatorBins };
  Kind kind = Kind::Polynomial;
  int degree_or_bins = 3;
  double scale = 1.0;  // states divided by scale before taking powers
  double range = 0.0;  // bin range [-range, range]; 0 selects it from the data
};

RegressionBasis make_basis(const std::string& spec);  // "poly:d" | "bins:b"

Eigen::MatrixXd basis_matrix(const RegressionBasis& basis, const Eigen::VectorXd& states);

// Simulated or discretized driver paths on one subdivision: values(i, k) is
// path i at times[k].
struct PathBatch {
  Eigen::VectorXd times;
  Eigen::MatrixXd values;

  int path_count() const { return static_cast<int>(values.rows()); }
  int step_count() const { return static_cast<int>(times.size()) - 1; }
};

PathBatch simulate_brownian_batch(const Eigen::VectorXd& times, int path_count,
                                  std::uint64_t seed);

// Restriction of a batch to a coarser subdivision (points must lie on the
// fine one).
PathBatch discretize_batch(const PathBatch& fine, const Eigen::VectorXd& subdivision);

// Uniform subdivision {0, mesh, ..., horizon}.
Eigen::VectorXd uniform_subdivision(double horizon, double mesh);

struct LsmcOptions {
  NodeSolveConfig node_cfg;
  bool store_y = true;
  bool store_z = true;
  bool store_dn = true;
};

// Backward regression solution of the clock-driven equation: per step the
// one-step continuation is projected onto [B(X), B(X)*dW] in one least
// squares solve (QR); the B-part is the conditional expectation, the
// B*dW-part is Z, and the residual is the orthogonal increment dN.
struct McSolution {
  Eigen::VectorXd times;
  int path_count = 0;
  int cap_index = 0;
  Eigen::VectorXi stop_index;  // subdivision index of tau per path
  Eigen::VectorXd tau;
  Eigen::VectorXd xi;
  double y0 = 0.0;
  Eigen::MatrixXd Y;               // paths x (cap_index + 1), if store_y
  Eigen::MatrixXd Z;               // paths x cap_index, if store_z
  Eigen::MatrixXd dN;              // paths x cap_index, if store_dn
  Eigen::VectorXd orth_residual;   // per step, |<dN, dW>| / (|C| |dW|)
  Eigen::VectorXd proj_residual;   // per step, max_j |<dN, D_j>| / (|D_j| |C|)
  double n_s2_norm = 0.0;          // sqrt(E[sup_t |N_t|^2]), needs store_dn
  double z_clock_integral = 0.0;   // mean over paths of sum Z^2 d<W^n>
  int degraded_steps = 0;          // steps where the basis collapsed to {1}
};

McSolution lsmc_solve(const PathBatch& paths, const StoppingRule& rule, const Generator& gen,
                      const TerminalCondition& terminal, const RegressionBasis& basis,
                      const LsmcOptions& opts = {});

// Nonparametric bootstrap of Y_0: re-solves on path batches resampled with
// replacement and returns the sample standard deviation of the estimates.
double lsmc_y0_bootstrap_stderr(const PathBatch& paths, const StoppingRule& rule,
                                const Generator& gen, const TerminalCondition& terminal,
                                const RegressionBasis& basis, int resamples, std::uint64_t seed,
                                const LsmcOptions& opts = {});

// Refinement study of the orthogonal decomposition of the terminal value
// (driver = 0): discretize common fine paths on nested subdivisions with
// nonincreasing barriers and compare against the finest level.
struct DecompositionLevel {
  double mesh = 0.0;
  double m_sup_discrepancy = 0.0;  // sqrt(mean sup_t |M^n_t - M_ref_t|^2)
  double z_clock_integral = 0.0;
  double z_integral_gap = 0.0;     // |level integral - reference integral|
  double n_s2_norm = 0.0;
};

struct DecompositionReport {
  std::vector<DecompositionLevel> levels;
};

DecompositionReport decomposition_stability(const PathBatch& fine,
                                            const std::vector<Eigen::VectorXd>& subdivisions,
                                            const std::vector<double>& barriers_an, double cap,
                                            const TerminalCondition& terminal,
                                            const RegressionBasis& basis,
                                            const LsmcOptions& opts = {});

// Both routes of <M>^tau = <M^tau> for the discretized clock: the unstopped
// clock read at t^tau versus the summed conditional variances of the stopped
// increments.
struct BracketPair {
  Eigen::VectorXd lhs;
  Eigen::VectorXd rhs;
  double max_gap = 0.0;
};

BracketPair bracket_stopped_identity(const Eigen::VectorXd& subdivision, double tau,
                                     const Eigen::VectorXd& eval_times);

}  // namespace bsde
