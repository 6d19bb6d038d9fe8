#pragma once

#include "bsde/lattice.hpp"

namespace bsde {

// Picard iterate on the lattice: the p-th pair (y, z), stored on the same
// pruned layout as a direct solution. The p = 0 iterate is identically zero.
struct PicardIterate {
  int p = 0;
  DiscreteSolution values;
};

// The all-zero starting iterate on the lattice induced by (spec, rule).
PicardIterate picard_zero(const LatticeSpec& spec, const StoppingRule& rule);

// One Picard sweep: solves the linear backward equation with the driver
// frozen at the previous iterate. Explicit recursion, no fixed point.
PicardIterate picard_step(const PicardIterate& prev, const Generator& gen,
                          const TerminalCondition& terminal);

struct PicardResult {
  PicardIterate iterate;
  int iterations_used = 0;
  bool converged = false;
  double final_change = 0.0;  // sup-node change of the last sweep
};

// Iterates until the sup-node change of (y, z) drops below tol or p_max
// sweeps were taken. Non-convergence is reported, not thrown.
PicardResult picard_solve(const LatticeSpec& spec, const Generator& gen,
                          const TerminalCondition& terminal, const StoppingRule& rule,
                          int p_max, double tol);

// sup-node gap max(|dy|, |dz|) between two iterates on one layout.
double picard_gap(const DiscreteSolution& a, const DiscreteSolution& b);

}  // namespace bsde
