#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bsde {

// Config validation failure; `field` names the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& msg)
      : std::runtime_error("config error: field '" + field + "': " + msg),
        field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// One experiment: scheme, problem data, scales, seeds, tolerances.
struct ExperimentConfig {
  std::string scheme = "lattice";  // lattice | picard | lsmc | oracle-only
  std::string generator = "zero";
  std::string terminal = "constant:1";
  double barrier_a = 0.5;
  std::optional<double> barrier_an;  // override of the aligned default
  bool two_sided = true;
  int horizon_T = 4;
  std::vector<int> n_list;
  double sup_window_L = 1.0;
  int path_count = 200;  // Monte Carlo diagnostics / LSMC batch size
  std::uint64_t seed = 12345;
  int bvp_grid_size = 512;
  std::string out_dir = "out";
  double fixed_point_tol = 1e-14;
  int max_iters = 200;
  int picard_p_max = 60;
  double picard_tol = 1e-12;
  double lsmc_mesh = 0.0625;
  std::string lsmc_basis = "poly:3";
  bool lsmc_store_paths = true;
  int lsmc_bootstrap = 0;  // bootstrap resamples for the y0 stderr (0 = skip)
  int threads = 1;
};

// strict = true validates scheme-dependent requirements (n_list, contraction
// bounds); verify-style callers parse leniently and let solvers report.
ExperimentConfig parse_config_file(const std::string& path, bool strict = true);
ExperimentConfig parse_config_text(const std::string& text, bool strict = true);

}  // namespace bsde
