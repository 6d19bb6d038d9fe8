#include "bsde/picard.hpp"

#include <cmath>
#include <stdexcept>

#include "bsde/errors.hpp"

namespace bsde {

PicardIterate picard_zero(const LatticeSpec& spec, const StoppingRule& rule) {
  if (rule.cap > static_cast<double>(spec.horizon_T))
    throw std::invalid_argument("picard_zero: cap exceeds lattice horizon");
  const int n = spec.n;
  const auto depth = static_cast<int>(clock_step(rule.cap, n));
  if (depth < 1) throw std::invalid_argument("picard_zero: cap shorter than one step");

  PicardIterate it;
  it.p = 0;
  DiscreteSolution& sol = it.values;
  sol.spec = spec;
  sol.rule = rule;
  sol.depth = depth;
  const int m = barrier_index_for(rule, n, depth);
  sol.barrier_index = m;
  sol.layout = LatticeLayout(n, depth, m, rule.two_sided);
  sol.y.setZero(sol.layout.size());
  sol.z.setZero(sol.layout.size());
  sol.kinds.resize(sol.layout.size());
  for (int k = 0; k <= depth; ++k) {
    for (int j = sol.layout.j_lo(k); j <= sol.layout.j_hi(k); j += 2) {
      const bool exceeded = rule.two_sided ? std::abs(j) >= m : j >= m;
      NodeKind kind = NodeKind::Interior;
      if (exceeded && k >= 1)
        kind = NodeKind::Exit;
      else if (k == depth)
        kind = NodeKind::Cap;
      sol.kinds[sol.layout.index(k, j)] = kind;
    }
  }
  return it;
}

PicardIterate picard_step(const PicardIterate& prev, const Generator& gen,
                          const TerminalCondition& terminal) {
  const DiscreteSolution& old = prev.values;
  const int n = old.n();
  PicardIterate next;
  next.p = prev.p + 1;
  next.values = old;  // copies layout, kinds, rule; y/z overwritten below
  DiscreteSolution& sol = next.values;

  for (int k = old.depth; k >= 0; --k) {
    for (int j = old.layout.j_lo(k); j <= old.layout.j_hi(k); j += 2) {
      const Eigen::Index idx = old.layout.index(k, j);
      const double pos = lattice_position(j, n);
      switch (old.kinds[idx]) {
        case NodeKind::Exit:
          sol.y[idx] = terminal(pos, static_cast<double>(k) / n);
          sol.z[idx] = 0.0;
          break;
        case NodeKind::Cap:
          sol.y[idx] = terminal(pos, old.rule.cap);
          sol.z[idx] = 0.0;
          break;
        case NodeKind::Interior: {
          const double y_up = sol.y[old.layout.index(k + 1, j + 1)];
          const double y_dn = sol.y[old.layout.index(k + 1, j - 1)];
          // Driver frozen at the previous iterate's stage-k pair.
          const double f = gen.eval(static_cast<double>(k) / n, old.y[idx], old.z[idx]);
          if (!std::isfinite(f)) throw GeneratorError("picard_step: non-finite driver value");
          sol.z[idx] = lattice_conditional_z(y_up, y_dn, n, true);
          sol.y[idx] = 0.5 * (y_up + y_dn) + f / n;
          break;
        }
      }
    }
  }
  return next;
}

double picard_gap(const DiscreteSolution& a, const DiscreteSolution& b) {
  if (a.y.size() != b.y.size()) throw std::invalid_argument("picard_gap: layout mismatch");
  const double dy = (a.y - b.y).cwiseAbs().maxCoeff();
  const double dz = (a.z - b.z).cwiseAbs().maxCoeff();
  return std::max(dy, dz);
}

PicardResult picard_solve(const LatticeSpec& spec, const Generator& gen,
                          const TerminalCondition& terminal, const StoppingRule& rule,
                          int p_max, double tol) {
  if (gen.lipschitz_K >= spec.n) throw ContractionError("picard_solve: requires n > K");
  if (p_max < 1) throw std::invalid_argument("picard_solve: p_max must be >= 1");
  PicardResult result;
  PicardIterate current = picard_zero(spec, rule);
  for (int p = 1; p <= p_max; ++p) {
    PicardIterate next = picard_step(current, gen, terminal);
    result.final_change = picard_gap(next.values, current.values);
    result.iterations_used = p;
    current = std::move(next);
    if (result.final_change < tol) {
      result.converged = true;
      break;
    }
  }
  result.iterate = std::move(current);
  return result;
}

}  // namespace bsde
