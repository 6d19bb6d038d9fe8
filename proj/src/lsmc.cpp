#include "bsde/lsmc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bsde/errors.hpp"
#include "bsde/paths.hpp"
#include "bsde/rng.hpp"

namespace bsde {

RegressionBasis make_basis(const std::string& spec) {
  const std::size_t colon = spec.find(':');
  if (colon == std::string::npos)
    throw std::invalid_argument("make_basis: expected 'poly:d' or 'bins:b'");
  const std::string head = spec.substr(0, colon);
  const int count = std::stoi(spec.substr(colon + 1));
  RegressionBasis basis;
  if (head == "poly") {
    if (count < 0) throw std::invalid_argument("make_basis: degree must be >= 0");
    basis.kind = RegressionBasis::Kind::Polynomial;
  } else if (head == "bins") {
    if (count < 1) throw std::invalid_argument("make_basis: bins must be >= 1");
    basis.kind = RegressionBasis::Kind::IndicatorBins;
  } else {
    throw std::invalid_argument("make_basis: unknown basis '" + spec + "'");
  }
  basis.degree_or_bins = count;
  return basis;
}

Eigen::MatrixXd basis_matrix(const RegressionBasis& basis, const Eigen::VectorXd& states) {
  const Eigen::Index rows = states.size();
  if (basis.kind == RegressionBasis::Kind::Polynomial) {
    const int degree = basis.degree_or_bins;
    Eigen::MatrixXd B(rows, degree + 1);
    B.col(0).setOnes();
    if (degree >= 1) B.col(1) = states / basis.scale;
    for (int p = 2; p <= degree; ++p) B.col(p) = B.col(p - 1).cwiseProduct(B.col(1));
    return B;
  }
  const int bins = basis.degree_or_bins;
  double range = basis.range;
  if (range <= 0.0) range = std::max(1e-12, states.cwiseAbs().maxCoeff()) * (1.0 + 1e-9);
  const double width = 2.0 * range / bins;
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(rows, bins);
  for (Eigen::Index i = 0; i < rows; ++i) {
    auto bin = static_cast<Eigen::Index>(std::floor((states[i] + range) / width));
    bin = std::clamp<Eigen::Index>(bin, 0, bins - 1);
    B(i, bin) = 1.0;
  }
  return B;
}

PathBatch simulate_brownian_batch(const Eigen::VectorXd& times, int path_count,
                                  std::uint64_t seed) {
  if (times.size() < 2) throw std::invalid_argument("simulate_brownian_batch: need >= 2 times");
  if (times[0] != 0.0)
    throw std::invalid_argument("simulate_brownian_batch: times must start at 0");
  if (path_count < 1) throw std::invalid_argument("simulate_brownian_batch: need >= 1 path");
  PathBatch batch;
  batch.times = times;
  batch.values.resize(path_count, times.size());
  for (int i = 0; i < path_count; ++i) {
    SplitMix64 rng = stream_rng(seed, static_cast<std::uint64_t>(i));
    batch.values(i, 0) = 0.0;
    for (Eigen::Index k = 1; k < times.size(); ++k) {
      const double dt = times[k] - times[k - 1];
      if (!(dt > 0.0))
        throw std::invalid_argument("simulate_brownian_batch: times not increasing");
      batch.values(i, k) = batch.values(i, k - 1) + std::sqrt(dt) * rng.gaussian();
    }
  }
  return batch;
}

PathBatch discretize_batch(const PathBatch& fine, const Eigen::VectorXd& subdivision) {
  const auto indices = subdivision_indices(fine.times, subdivision);
  PathBatch out;
  out.times = subdivision;
  out.values.resize(fine.values.rows(), subdivision.size());
  for (std::size_t k = 0; k < indices.size(); ++k)
    out.values.col(static_cast<Eigen::Index>(k)) = fine.values.col(indices[k]);
  return out;
}

Eigen::VectorXd uniform_subdivision(double horizon, double mesh) {
  if (!(horizon > 0.0) || !(mesh > 0.0))
    throw std::invalid_argument("uniform_subdivision: horizon and mesh must be > 0");
  const auto steps = static_cast<Eigen::Index>(std::ceil(horizon / mesh - 1e-12));
  Eigen::VectorXd times(steps + 1);
  for (Eigen::Index k = 0; k <= steps; ++k) times[k] = static_cast<double>(k) * mesh;
  return times;
}

namespace {

struct StepRegression {
  Eigen::VectorXd e_hat;     // conditional expectation of the continuation
  Eigen::VectorXd z_hat;     // covariation coefficient vs dW
  Eigen::VectorXd residual;  // dN increments
  double orth = 0.0;
  double proj = 0.0;
  double alpha0 = 0.0;  // fit coefficients when the basis collapses to {1}
  double beta0 = 0.0;
  bool degraded = false;  // basis collapsed to {1} (constant state or thin tail)
};

bool degenerate_states(const Eigen::VectorXd& x) {
  if (x.size() == 0) return true;
  const double span = x.maxCoeff() - x.minCoeff();
  return span <= 1e-12 * (1.0 + x.cwiseAbs().maxCoeff());
}

// One joint least-squares projection of the continuation onto [B, B.*dW].
// When the active set is thinner than the full design (late steps of barrier
// problems) the basis degrades to {1}; a rank error is reserved for designs
// that are singular with enough rows.
StepRegression regress_step(const RegressionBasis& basis, const Eigen::VectorXd& states,
                            const Eigen::VectorXd& dw, const Eigen::VectorXd& continuation) {
  const Eigen::Index rows = states.size();
  StepRegression out;
  if (rows == 1) {
    // A single sample: the projection interpolates.
    out.e_hat = continuation;
    out.z_hat = Eigen::VectorXd::Zero(1);
    out.residual = Eigen::VectorXd::Zero(1);
    out.alpha0 = continuation[0];
    out.beta0 = 0.0;
    out.degraded = true;
    return out;
  }
  Eigen::MatrixXd B;
  if (degenerate_states(states)) {
    B = Eigen::MatrixXd::Ones(rows, 1);
    out.degraded = true;
  } else {
    B = basis_matrix(basis, states);
    if (rows < 2 * B.cols()) {
      B = Eigen::MatrixXd::Ones(rows, 1);
      out.degraded = true;
    }
  }
  const Eigen::Index b = B.cols();
  Eigen::MatrixXd design(rows, 2 * b);
  design.leftCols(b) = B;
  design.rightCols(b) = B.array().colwise() * dw.array();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < 2 * b)
    throw RankError("lsmc_solve: singular regression design; lower the basis degree");
  const Eigen::VectorXd coef = qr.solve(continuation);

  out.e_hat = B * coef.head(b);
  out.z_hat = B * coef.tail(b);
  out.residual = continuation - out.e_hat - out.z_hat.cwiseProduct(dw);
  // Residual orthogonality, relative to the projection target's scale (the
  // QR guarantee; the residual's own norm can be pure rounding noise when
  // the continuation is exactly representable).
  const double c_norm = continuation.norm();
  const double dw_norm = dw.norm();
  out.orth = (c_norm > 0.0 && dw_norm > 0.0)
                 ? std::abs(out.residual.dot(dw)) / (c_norm * dw_norm)
                 : 0.0;
  double proj = 0.0;
  if (c_norm > 0.0) {
    for (Eigen::Index col = 0; col < design.cols(); ++col) {
      const double col_norm = design.col(col).norm();
      if (col_norm == 0.0) continue;
      proj = std::max(proj, std::abs(design.col(col).dot(out.residual)) / (col_norm * c_norm));
    }
  }
  out.proj = proj;
  out.alpha0 = coef[0];
  out.beta0 = coef[b];
  return out;
}

}  // namespace

McSolution lsmc_solve(const PathBatch& paths, const StoppingRule& rule, const Generator& gen,
                      const TerminalCondition& terminal, const RegressionBasis& basis,
                      const LsmcOptions& opts) {
  const int P = paths.path_count();
  const int M = paths.step_count();
  if (P < 2) throw std::invalid_argument("lsmc_solve: need at least 2 paths");
  if (M < 1) throw std::invalid_argument("lsmc_solve: need at least 1 step");
  if (paths.times[0] != 0.0) throw std::invalid_argument("lsmc_solve: times must start at 0");

  // Cap index: last subdivision point <= cap.
  int kc = 0;
  while (kc + 1 <= M && paths.times[kc + 1] <= rule.cap) ++kc;
  if (kc < 1) throw std::invalid_argument("lsmc_solve: cap shorter than one step");

  double max_dt = 0.0;
  for (int k = 0; k < kc; ++k) max_dt = std::max(max_dt, paths.times[k + 1] - paths.times[k]);
  if (gen.lipschitz_K * max_dt >= 1.0)
    throw ContractionError("lsmc_solve: K*mesh >= 1, node equation is not a contraction");

  McSolution sol;
  sol.times = paths.times.head(kc + 1);
  sol.path_count = P;
  sol.cap_index = kc;
  sol.stop_index.resize(P);
  sol.tau.resize(P);
  sol.xi.resize(P);
  sol.orth_residual.setZero(kc);
  sol.proj_residual.setZero(kc);
  if (opts.store_y) sol.Y.setZero(P, kc + 1);
  if (opts.store_z) sol.Z.setZero(P, kc);
  if (opts.store_dn) sol.dN.setZero(P, kc);

  for (int i = 0; i < P; ++i) {
    int s = kc;
    bool capped = true;
    for (int k = 1; k <= kc; ++k) {
      if (rule.exceeds(paths.values(i, k))) {
        s = k;
        capped = false;
        break;
      }
    }
    sol.stop_index[i] = s;
    sol.tau[i] = paths.times[s];
    sol.xi[i] = terminal(paths.values(i, s), capped ? rule.cap : paths.times[s]);
  }

  Eigen::VectorXd y_next = sol.xi;  // Y at step kc: every path is at/past tau
  if (opts.store_y) sol.Y.col(kc) = y_next;
  Eigen::VectorXd y_curr(P);
  std::vector<int> active;
  active.reserve(P);

  for (int k = kc - 1; k >= 0; --k) {
    const double dt = paths.times[k + 1] - paths.times[k];
    const double t = paths.times[k];
    active.clear();
    for (int i = 0; i < P; ++i) {
      if (sol.stop_index[i] > k)
        active.push_back(i);
      else
        y_curr[i] = sol.xi[i];  // frozen at the terminal value
    }
    if (!active.empty()) {
      const auto na = static_cast<Eigen::Index>(active.size());
      Eigen::VectorXd x(na), dw(na), c(na);
      for (Eigen::Index r = 0; r < na; ++r) {
        const int i = active[static_cast<std::size_t>(r)];
        x[r] = paths.values(i, k);
        dw[r] = paths.values(i, k + 1) - paths.values(i, k);
        c[r] = y_next[i];
      }
      const StepRegression reg = regress_step(basis, x, dw, c);
      if (reg.degraded) ++sol.degraded_steps;
      sol.orth_residual[k] = reg.orth;
      sol.proj_residual[k] = reg.proj;
      for (Eigen::Index r = 0; r < na; ++r) {
        const int i = active[static_cast<std::size_t>(r)];
        const double y = solve_implicit_y(reg.e_hat[r], reg.z_hat[r], t, gen, dt, opts.node_cfg);
        y_curr[i] = y;
        if (opts.store_z) sol.Z(i, k) = reg.z_hat[r];
        if (opts.store_dn) sol.dN(i, k) = reg.residual[r];
        sol.z_clock_integral += reg.z_hat[r] * reg.z_hat[r] * dt;
      }
    }
    y_next = y_curr;
    if (opts.store_y) sol.Y.col(k) = y_curr;
  }
  sol.y0 = y_next[0];
  sol.z_clock_integral /= P;

  if (opts.store_dn) {
    double total = 0.0;
    for (int i = 0; i < P; ++i) {
      double running = 0.0, sup = 0.0;
      for (int k = 0; k < kc; ++k) {
        running += sol.dN(i, k);
        sup = std::max(sup, std::abs(running));
      }
      total += sup * sup;
    }
    sol.n_s2_norm = std::sqrt(total / P);
  }
  return sol;
}

double lsmc_y0_bootstrap_stderr(const PathBatch& paths, const StoppingRule& rule,
                                const Generator& gen, const TerminalCondition& terminal,
                                const RegressionBasis& basis, int resamples,
                                std::uint64_t seed, const LsmcOptions& opts) {
  if (resamples < 2)
    throw std::invalid_argument("lsmc_y0_bootstrap_stderr: need >= 2 resamples");
  LsmcOptions light = opts;
  light.store_y = light.store_z = light.store_dn = false;
  const int P = paths.path_count();
  Eigen::VectorXd estimates(resamples);
  PathBatch resampled;
  resampled.times = paths.times;
  resampled.values.resize(P, paths.values.cols());
  for (int b = 0; b < resamples; ++b) {
    SplitMix64 rng = stream_rng(seed, static_cast<std::uint64_t>(b));
    for (int i = 0; i < P; ++i) {
      const auto pick = std::min<Eigen::Index>(static_cast<Eigen::Index>(rng.uniform01() * P),
                                               P - 1);
      resampled.values.row(i) = paths.values.row(pick);
    }
    estimates[b] = lsmc_solve(resampled, rule, gen, terminal, basis, light).y0;
  }
  const double mean = estimates.mean();
  return std::sqrt((estimates.array() - mean).square().sum() / (resamples - 1));
}

DecompositionReport decomposition_stability(const PathBatch& fine,
                                            const std::vector<Eigen::VectorXd>& subdivisions,
                                            const std::vector<double>& barriers_an, double cap,
                                            const TerminalCondition& terminal,
                                            const RegressionBasis& basis,
                                            const LsmcOptions& opts) {
  if (subdivisions.empty() || subdivisions.size() != barriers_an.size())
    throw std::invalid_argument("decomposition_stability: level/barrier mismatch");
  const Generator zero = make_generator("zero");
  const int P = fine.path_count();
  const std::size_t levels = subdivisions.size();

  LsmcOptions level_opts = opts;
  level_opts.store_y = true;
  level_opts.store_dn = true;

  std::vector<McSolution> solutions;
  std::vector<std::vector<Eigen::Index>> level_of_fine(levels);
  solutions.reserve(levels);
  for (std::size_t l = 0; l < levels; ++l) {
    const PathBatch batch = discretize_batch(fine, subdivisions[l]);
    StoppingRule rule;
    rule.barrier_a = barriers_an.back();
    rule.barrier_an = barriers_an[l];
    rule.cap = cap;
    rule.two_sided = true;
    solutions.push_back(lsmc_solve(batch, rule, zero, terminal, basis, level_opts));

    // Map each fine grid point to the last subdivision index at or before it.
    const auto idx = subdivision_indices(fine.times, subdivisions[l]);
    std::vector<Eigen::Index> map(fine.times.size());
    std::size_t at = 0;
    for (Eigen::Index fi = 0; fi < fine.times.size(); ++fi) {
      while (at + 1 < idx.size() && idx[at + 1] <= fi) ++at;
      map[fi] = static_cast<Eigen::Index>(at);
    }
    level_of_fine[l] = std::move(map);
  }

  const McSolution& ref = solutions.back();
  const auto& ref_map = level_of_fine.back();
  DecompositionReport report;
  for (std::size_t l = 0; l < levels; ++l) {
    const McSolution& sol = solutions[l];
    DecompositionLevel level;
    double mesh = 0.0;
    for (Eigen::Index k = 1; k < subdivisions[l].size(); ++k)
      mesh = std::max(mesh, subdivisions[l][k] - subdivisions[l][k - 1]);
    level.mesh = mesh;
    double total = 0.0;
    for (int i = 0; i < P; ++i) {
      double sup = 0.0;
      for (Eigen::Index fi = 0; fi < fine.times.size(); ++fi) {
        if (fine.times[fi] > cap) break;
        const Eigen::Index kl = std::min<Eigen::Index>(level_of_fine[l][fi], sol.cap_index);
        const Eigen::Index kr = std::min<Eigen::Index>(ref_map[fi], ref.cap_index);
        sup = std::max(sup, std::abs(sol.Y(i, kl) - ref.Y(i, kr)));
      }
      total += sup * sup;
    }
    level.m_sup_discrepancy = std::sqrt(total / P);
    level.z_clock_integral = sol.z_clock_integral;
    level.z_integral_gap = std::abs(sol.z_clock_integral - ref.z_clock_integral);
    level.n_s2_norm = sol.n_s2_norm;
    report.levels.push_back(level);
  }
  return report;
}

BracketPair bracket_stopped_identity(const Eigen::VectorXd& subdivision, double tau,
                                     const Eigen::VectorXd& eval_times) {
  if (!(tau >= 0.0)) throw std::invalid_argument("bracket_stopped_identity: negative tau");
  const ProcessClock clock = ProcessClock::discretized(subdivision);
  BracketPair pair;
  pair.lhs.resize(eval_times.size());
  pair.rhs.resize(eval_times.size());
  for (Eigen::Index i = 0; i < eval_times.size(); ++i) {
    const double t = eval_times[i];
    pair.lhs[i] = clock(std::min(t, tau));
    // Independent route: conditional variances of the stopped increments.
    double acc = subdivision[0];
    for (Eigen::Index k = 0; k + 1 < subdivision.size(); ++k) {
      const double jump_time = subdivision[k + 1];
      if (jump_time <= t && jump_time <= tau) acc += subdivision[k + 1] - subdivision[k];
    }
    pair.rhs[i] = acc;
    pair.max_gap = std::max(pair.max_gap, std::abs(pair.lhs[i] - pair.rhs[i]));
  }
  return pair;
}

}  // namespace bsde
