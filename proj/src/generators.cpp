#include "bsde/generators.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "bsde/errors.hpp"
#include "bsde/rng.hpp"

namespace bsde {
namespace {

std::vector<double> parse_params(const std::string& spec, std::size_t colon,
                                 std::size_t expected) {
  std::vector<double> params;
  if (colon == std::string::npos) {
    if (expected != 0)
      throw std::invalid_argument("make_generator: missing parameters in '" + spec + "'");
    return params;
  }
  std::stringstream ss(spec.substr(colon + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    params.push_back(std::stod(item, &used));
    if (used != item.size())
      throw std::invalid_argument("make_generator: bad number '" + item + "'");
  }
  if (params.size() != expected)
    throw std::invalid_argument("make_generator: wrong parameter count in '" + spec + "'");
  return params;
}

}  // namespace

Generator make_generator(const std::string& spec) {
  const std::size_t colon = spec.find(':');
  const std::string head = spec.substr(0, colon);
  Generator gen;
  gen.name = spec;
  if (head == "zero") {
    parse_params(spec, colon, 0);
    gen.eval = [](double, double, double) { return 0.0; };
    gen.lipschitz_K = 0.0;
    gen.bound = 0.0;
  } else if (head == "constant") {
    const auto p = parse_params(spec, colon, 1);
    const double c = p[0];
    gen.eval = [c](double, double, double) { return c; };
    gen.lipschitz_K = 0.0;
    gen.bound = std::abs(c);
  } else if (head == "linear") {
    const auto p = parse_params(spec, colon, 3);
    const double alpha = p[0], beta = p[1], c = p[2];
    gen.eval = [alpha, beta, c](double, double y, double z) { return alpha * y + beta * z + c; };
    gen.lipschitz_K = std::max(std::abs(alpha), std::abs(beta));
    if (alpha < 0.0) gen.monotonicity_mu = -alpha;
  } else if (head == "sin-z") {
    parse_params(spec, colon, 0);
    gen.eval = [](double, double, double z) { return std::sin(z); };
    gen.lipschitz_K = 1.0;
    gen.bound = 1.0;
  } else if (head == "nan") {
    // Deliberately broken driver; exists so error paths can be exercised
    // from a config file.
    parse_params(spec, colon, 0);
    gen.eval = [](double, double, double) { return std::numeric_limits<double>::quiet_NaN(); };
    gen.lipschitz_K = 0.0;
  } else if (head == "linear+sin-z") {
    const auto p = parse_params(spec, colon, 3);
    const double alpha = p[0], beta = p[1], c = p[2];
    gen.eval = [alpha, beta, c](double, double y, double z) {
      return alpha * y + beta * z + c + std::sin(z);
    };
    gen.lipschitz_K = std::max(std::abs(alpha), std::abs(beta) + 1.0);
    if (alpha < 0.0) gen.monotonicity_mu = -alpha;
  } else {
    throw std::invalid_argument("make_generator: unknown preset '" + spec + "'");
  }
  return gen;
}

TerminalCondition terminal_constant(double c) {
  TerminalCondition xi;
  xi.kind = TerminalCondition::Kind::Constant;
  xi.constant = c;
  xi.bound = std::abs(c);
  return xi;
}

TerminalCondition terminal_of_state(std::function<double(double)> g, double bound) {
  TerminalCondition xi;
  xi.kind = TerminalCondition::Kind::ExitState;
  xi.g = std::move(g);
  xi.bound = bound;
  return xi;
}

TerminalCondition terminal_of_state_time(std::function<double(double, double)> g) {
  TerminalCondition xi;
  xi.kind = TerminalCondition::Kind::ExitStateTime;
  xi.g_t = std::move(g);
  return xi;
}

TerminalCondition make_terminal(const std::string& spec) {
  const std::size_t colon = spec.find(':');
  const std::string head = spec.substr(0, colon);
  if (head == "constant") {
    if (colon == std::string::npos)
      throw std::invalid_argument("make_terminal: missing constant in '" + spec + "'");
    return terminal_constant(std::stod(spec.substr(colon + 1)));
  }
  if (head == "identity") return terminal_of_state([](double x) { return x; });
  if (head == "exp") return terminal_of_state([](double x) { return std::exp(x); });
  throw std::invalid_argument("make_terminal: unknown preset '" + spec + "'");
}

AssumptionReport validate_generator(const Generator& gen, const SampleBox& box,
                                    int sample_count, std::uint64_t seed, double tol) {
  if (sample_count < 2)
    throw std::invalid_argument("validate_generator: need at least 2 samples");
  SplitMix64 rng = stream_rng(seed, 0x6e);
  AssumptionReport report;

  auto eval_checked = [&gen](double t, double y, double z) {
    const double v = gen.eval(t, y, z);
    if (!std::isfinite(v)) throw GeneratorError("validate_generator: non-finite driver value");
    return v;
  };
  auto draw = [&rng](double lo, double hi) { return lo + (hi - lo) * rng.uniform01(); };

  const double h = 1e-5 * std::max({1.0, std::abs(box.y_max), std::abs(box.z_max)});
  double prev_t = 0.0, prev_y = 0.0, prev_z = 0.0, prev_f = 0.0;
  bool have_prev = false;
  for (int i = 0; i < sample_count; ++i) {
    const double t = draw(box.t_min, box.t_max);
    const double y = draw(box.y_min, box.y_max);
    const double z = draw(box.z_min, box.z_max);
    const double f = eval_checked(t, y, z);
    report.bound_estimate = std::max(report.bound_estimate, std::abs(f));

    // Coordinate finite-difference quotients (pairs at distance 2h).
    const double fy = std::abs(eval_checked(t, y + h, z) - eval_checked(t, y - h, z)) / (2 * h);
    const double fz = std::abs(eval_checked(t, y, z + h) - eval_checked(t, y, z - h)) / (2 * h);
    report.lipschitz_estimate = std::max({report.lipschitz_estimate, fy, fz});

    // Random same-t pair quotient in the l1 norm.
    if (have_prev && std::abs(y - prev_y) + std::abs(z - prev_z) > 1e-12) {
      const double f_prev_t = eval_checked(t, prev_y, prev_z);
      const double quotient =
          std::abs(f - f_prev_t) / (std::abs(y - prev_y) + std::abs(z - prev_z));
      report.lipschitz_estimate = std::max(report.lipschitz_estimate, quotient);
    }

    // Monotonicity in y against the claimed mu, same (t, z).
    if (gen.monotonicity_mu) {
      const double mu = *gen.monotonicity_mu;
      const double y2 = draw(box.y_min, box.y_max);
      const double f2 = eval_checked(t, y2, z);
      const double dy = y - y2;
      if (dy * (f - f2) > -mu * dy * dy + tol) ++report.monotonicity_violations;
    }

    prev_t = t;
    prev_y = y;
    prev_z = z;
    prev_f = f;
    have_prev = true;
    (void)prev_t;
    (void)prev_f;
  }
  report.bound_ok = !(std::isfinite(gen.bound) && report.bound_estimate > gen.bound + tol);
  return report;
}

namespace {

double moment_norm(const Eigen::VectorXd& samples, double p) {
  if (samples.size() == 0)
    throw std::invalid_argument("validate_terminal_family: empty sample array");
  const double mean_pow = samples.array().abs().pow(p).mean();
  return std::pow(mean_pow, 1.0 / p);
}

}  // namespace

AssumptionReport validate_terminal_family(const std::vector<Eigen::VectorXd>& xi_per_n,
                                          const std::vector<Eigen::VectorXd>& tau_per_n,
                                          double delta, double growth_factor) {
  if (!(delta > 0.0)) throw std::invalid_argument("validate_terminal_family: delta must be > 0");
  if (xi_per_n.empty() || tau_per_n.empty())
    throw std::invalid_argument("validate_terminal_family: no sample levels");
  AssumptionReport report;
  report.moment_delta = delta;
  const double p = 1.0 + delta;
  for (const auto& xi : xi_per_n) {
    report.xi_moments.push_back(moment_norm(xi, p));
    report.xi_moment_sup = std::max(report.xi_moment_sup, report.xi_moments.back());
  }
  for (const auto& tau : tau_per_n) {
    report.tau_moments.push_back(moment_norm(tau, p));
    report.tau_moment_sup = std::max(report.tau_moment_sup, report.tau_moments.back());
  }
  auto flag_growth = [growth_factor](const std::vector<double>& m) {
    if (m.size() < 2) return false;
    bool increasing = true;
    for (std::size_t i = 1; i < m.size(); ++i)
      if (m[i] <= m[i - 1]) increasing = false;
    return increasing && m.back() > growth_factor * m.front();
  };
  report.growth_flagged = flag_growth(report.xi_moments) || flag_growth(report.tau_moments);
  return report;
}

}  // namespace bsde
