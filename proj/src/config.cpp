#include "bsde/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "bsde/generators.hpp"
#include "bsde/lsmc.hpp"

namespace bsde {
namespace {

using nlohmann::json;

template <typename T>
void read_field(const json& doc, const std::string& key, T& out) {
  if (!doc.contains(key)) return;
  try {
    out = doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(key, e.what());
  }
}

void validate(ExperimentConfig& cfg, bool strict) {
  static const std::set<std::string> schemes = {"lattice", "picard", "lsmc", "oracle-only"};
  if (!schemes.count(cfg.scheme))
    throw ConfigError("scheme", "must be one of lattice, picard, lsmc, oracle-only");

  Generator gen;
  try {
    gen = make_generator(cfg.generator);
  } catch (const std::exception& e) {
    throw ConfigError("generator", e.what());
  }
  try {
    make_terminal(cfg.terminal);
  } catch (const std::exception& e) {
    throw ConfigError("terminal", e.what());
  }
  if (!(cfg.barrier_a > 0.0)) throw ConfigError("barrier_a", "must be > 0");
  if (cfg.horizon_T < 1) throw ConfigError("horizon_T", "must be >= 1");
  if (!(cfg.sup_window_L > 0.0)) throw ConfigError("sup_window_L", "must be > 0");
  if (cfg.bvp_grid_size < 8) throw ConfigError("bvp_grid_size", "must be >= 8");
  if (!(cfg.fixed_point_tol > 0.0)) throw ConfigError("fixed_point_tol", "must be > 0");
  if (cfg.max_iters < 1) throw ConfigError("max_iters", "must be >= 1");
  if (cfg.threads < 1) throw ConfigError("threads", "must be >= 1");

  if (!strict) return;

  const bool needs_n = cfg.scheme == "lattice" || cfg.scheme == "picard";
  if (needs_n) {
    if (cfg.n_list.empty()) throw ConfigError("n_list", "must be nonempty");
    for (std::size_t i = 0; i < cfg.n_list.size(); ++i) {
      if (cfg.n_list[i] < 1) throw ConfigError("n_list", "entries must be >= 1");
      if (i > 0 && cfg.n_list[i] <= cfg.n_list[i - 1])
        throw ConfigError("n_list", "must be strictly increasing");
      if (gen.lipschitz_K >= cfg.n_list[i])
        throw ConfigError("n_list", "requires n > K for the lattice contraction");
    }
  }
  const bool monte_carlo = cfg.scheme == "lsmc" || cfg.scheme == "lattice";
  if (monte_carlo && cfg.path_count < 1) throw ConfigError("path_count", "must be >= 1");
  if (cfg.scheme == "lsmc") {
    if (!(cfg.lsmc_mesh > 0.0)) throw ConfigError("lsmc_mesh", "must be > 0");
    if (gen.lipschitz_K * cfg.lsmc_mesh >= 1.0)
      throw ConfigError("lsmc_mesh", "requires K*mesh < 1 for the node contraction");
    if (cfg.picard_p_max < 1) throw ConfigError("picard_p_max", "must be >= 1");
    try {
      make_basis(cfg.lsmc_basis);
    } catch (const std::exception& e) {
      throw ConfigError("lsmc_basis", e.what());
    }
  }
  if (cfg.scheme == "picard") {
    if (cfg.picard_p_max < 1) throw ConfigError("picard_p_max", "must be >= 1");
    if (!(cfg.picard_tol > 0.0)) throw ConfigError("picard_tol", "must be > 0");
  }
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, bool strict) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError("<document>", e.what());
  }
  if (!doc.is_object()) throw ConfigError("<document>", "top level must be an object");

  ExperimentConfig cfg;
  read_field(doc, "scheme", cfg.scheme);
  read_field(doc, "generator", cfg.generator);
  read_field(doc, "terminal", cfg.terminal);
  read_field(doc, "barrier_a", cfg.barrier_a);
  if (doc.contains("barrier_an") && !doc.at("barrier_an").is_null()) {
    double an = 0.0;
    read_field(doc, "barrier_an", an);
    cfg.barrier_an = an;
  }
  read_field(doc, "two_sided", cfg.two_sided);
  read_field(doc, "horizon_T", cfg.horizon_T);
  read_field(doc, "n_list", cfg.n_list);
  read_field(doc, "sup_window_L", cfg.sup_window_L);
  read_field(doc, "path_count", cfg.path_count);
  read_field(doc, "seed", cfg.seed);
  read_field(doc, "bvp_grid_size", cfg.bvp_grid_size);
  read_field(doc, "out_dir", cfg.out_dir);
  read_field(doc, "fixed_point_tol", cfg.fixed_point_tol);
  read_field(doc, "max_iters", cfg.max_iters);
  read_field(doc, "picard_p_max", cfg.picard_p_max);
  read_field(doc, "picard_tol", cfg.picard_tol);
  read_field(doc, "lsmc_mesh", cfg.lsmc_mesh);
  read_field(doc, "lsmc_basis", cfg.lsmc_basis);
  read_field(doc, "lsmc_store_paths", cfg.lsmc_store_paths);
  read_field(doc, "lsmc_bootstrap", cfg.lsmc_bootstrap);
  read_field(doc, "threads", cfg.threads);

  for (const auto& [key, value] : doc.items()) {
    (void)value;
    static const std::set<std::string> known = {
        "scheme",         "generator",   "terminal",     "barrier_a",      "barrier_an",
        "two_sided",      "horizon_T",   "n_list",       "sup_window_L",   "path_count",
        "seed",           "bvp_grid_size", "out_dir",    "fixed_point_tol", "max_iters",
        "picard_p_max",   "picard_tol",  "lsmc_mesh",    "lsmc_basis",     "lsmc_store_paths",
        "lsmc_bootstrap", "threads"};
    if (!known.count(key)) throw ConfigError(key, "unknown field");
  }

  validate(cfg, strict);
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path, bool strict) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), strict);
}

}  // namespace bsde
