#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace bsde {

// Driver f(t, y, z) with its declared constants. K is the Lipschitz constant
// in (y, z) for the l1 norm |dy| + |dz|; mu is the monotonicity constant in y
// when one is claimed; bound is a sup bound (infinity when unbounded).
struct Generator {
  std::function<double(double, double, double)> eval;
  double lipschitz_K = 0.0;
  std::optional<double> monotonicity_mu;
  double bound = std::numeric_limits<double>::infinity();
  std::string name;

  double operator()(double t, double y, double z) const { return eval(t, y, z); }
};

// Named presets addressable from config:
//   "zero"                      f = 0
//   "constant:c"                f = c
//   "linear:alpha,beta,c"       f = alpha*y + beta*z + c
//   "sin-z"                     f = sin(z)
//   "linear+sin-z:alpha,beta,c" f = alpha*y + beta*z + c + sin(z)
Generator make_generator(const std::string& spec);

// Terminal condition xi^n evaluated at the exit state (and exit time).
struct TerminalCondition {
  enum class Kind { Constant, ExitState, ExitStateTime };

  Kind kind = Kind::Constant;
  double constant = 0.0;
  std::function<double(double)> g;             // ExitState
  std::function<double(double, double)> g_t;   // ExitStateTime, g(x, t)
  double bound = std::numeric_limits<double>::infinity();

  double operator()(double x, double t) const {
    switch (kind) {
      case Kind::Constant: return constant;
      case Kind::ExitState: return g(x);
      case Kind::ExitStateTime: return g_t(x, t);
    }
    return constant;
  }
};

TerminalCondition terminal_constant(double c);
TerminalCondition terminal_of_state(std::function<double(double)> g,
                                    double bound = std::numeric_limits<double>::infinity());
TerminalCondition terminal_of_state_time(std::function<double(double, double)> g);

// Named presets: "constant:c", "identity", "exp".
TerminalCondition make_terminal(const std::string& spec);

// Empirical check of the hypotheses on drivers and terminal families.
struct AssumptionReport {
  double lipschitz_estimate = 0.0;
  long monotonicity_violations = 0;
  double bound_estimate = 0.0;
  bool bound_ok = true;
  double moment_delta = 0.0;
  std::vector<double> xi_moments;   // per level, E[|xi^n|^{1+d}]^{1/(1+d)}
  std::vector<double> tau_moments;  // per level, E[|tau^n|^{1+d}]^{1/(1+d)}
  double xi_moment_sup = 0.0;
  double tau_moment_sup = 0.0;
  bool growth_flagged = false;
};

struct SampleBox {
  double t_min = 0.0, t_max = 1.0;
  double y_min = -1.0, y_max = 1.0;
  double z_min = -1.0, z_max = 1.0;
};

// Samples the box and reports the max Lipschitz quotient over pairs (random
// and finite-difference), monotonicity violations against the claimed mu, and
// the sup of |f|. Deterministic given the seed.
AssumptionReport validate_generator(const Generator& gen, const SampleBox& box,
                                    int sample_count, std::uint64_t seed,
                                    double tol = 1e-9);

// Monte Carlo (1+delta)-moment estimates of |xi^n| and |tau^n| per level, the
// suprema over levels, and a growth flag when the estimates keep increasing
// beyond `growth_factor` between first and last level.
AssumptionReport validate_terminal_family(const std::vector<Eigen::VectorXd>& xi_per_n,
                                          const std::vector<Eigen::VectorXd>& tau_per_n,
                                          double delta, double growth_factor = 2.0);

}  // namespace bsde
