#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "spbm/harness/json_fields.hpp"
#include "spbm/harness/methods.hpp"
#include "spbm/harness/problems.hpp"

namespace spbm::harness {

/// Environment variable naming the root directory for relative outputs.
inline constexpr const char* kOutRootEnv = "SPBM_OUT_ROOT";

struct ExperimentConfig {
  std::string name = "experiment";
  ProblemSpec problem;
  std::vector<MethodSpec> methods;
  std::vector<std::uint64_t> seeds;
  /// Exactly one of these is set; epochs are converted with the problem's
  /// iterations_per_epoch() once it is built.
  std::optional<std::size_t> iterations;
  std::optional<std::size_t> epochs;
  /// Iterations between metric rows; 0 means once per epoch.
  std::size_t eval_every = 0;
  std::string out;
  /// Synthetic dataset cache; defaults to <out>/.cache.
  std::string cache_dir;
  /// Record wall_time_s. Off by default so reruns are byte-identical.
  bool timing = false;
  std::size_t threads = 1;
  /// Dotted parameter path -> list of values, for `grid`.
  json grid;
  double grid_tolerance = 0.1;
  /// Fully resolved configuration with defaults filled in.
  json resolved;
  /// The input document (after command-line overrides).
  json source;

  std::string cache_directory() const {
    return cache_dir.empty() ? (std::filesystem::path(out) / ".cache").string() : cache_dir;
  }
};

/// Values from the command line that take precedence over the file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> iterations;
  std::optional<std::string> out;
  std::optional<bool> timing;
  std::optional<std::size_t> threads;
};

inline void apply_overrides(json& raw, const Overrides& o) {
  if (o.seed) raw["seeds"] = json::array({*o.seed});
  if (o.iterations) {
    raw.erase("epochs");
    raw["iterations"] = *o.iterations;
  }
  if (o.timing) raw["timing"] = *o.timing;
  if (o.threads) raw["threads"] = *o.threads;
  // `out` is applied after resolution so it bypasses the output root.
}

namespace detail {

inline std::string default_out(const std::string& name, const std::string& given) {
  const char* root = std::getenv(kOutRootEnv);
  const std::filesystem::path base = (root && *root) ? root : "out";
  if (given.empty()) return (base / name).string();
  const std::filesystem::path p(given);
  if (p.is_absolute() || !(root && *root)) return p.string();
  return (base / p).string();
}

}  // namespace detail

/// Validates `raw` and fills in per-problem defaults. Throws ConfigError on
/// any unknown key, problem or method.
inline ExperimentConfig resolve_config(const json& raw, const Overrides& o = {}) {
  json src = raw;
  apply_overrides(src, o);
  ExperimentConfig cfg;
  cfg.source = src;
  Fields f(src, "config");
  f.read("name", cfg.name);

  const json* pj = f.raw("problem");
  if (!pj) throw ConfigError("config: missing 'problem'");
  std::string pname;
  json pparams = json::object();
  if (pj->is_string()) {
    pname = pj->get<std::string>();
  } else if (pj->is_object() && pj->contains("name") && (*pj)["name"].is_string()) {
    pname = (*pj)["name"].get<std::string>();
    pparams = *pj;
    pparams.erase("name");
  } else {
    throw ConfigError("config.problem: expected a name or an object with 'name'");
  }
  const json merged_problem = shallow_merge(default_problem_params(pname), pparams);
  cfg.problem = parse_problem(pname, merged_problem);

  json method_blocks = json::array();
  if (const json* m = f.raw("method")) method_blocks.push_back(*m);
  if (const json* ms = f.raw("methods")) {
    if (!ms->is_array()) throw ConfigError("config.methods: expected an array");
    for (const auto& m : *ms) method_blocks.push_back(m);
  }
  if (method_blocks.empty()) throw ConfigError("config: missing 'method' or 'methods'");
  json resolved_methods = json::array();
  for (json m : method_blocks) {
    if (m.is_string()) m = json{{"name", m}};
    if (!m.is_object() || !m.contains("name") || !m["name"].is_string()) {
      throw ConfigError("config.method: expected a name or an object with 'name'");
    }
    const std::string mname = m["name"].get<std::string>();
    if (std::find(method_names().begin(), method_names().end(), mname) == method_names().end()) {
      throw ConfigError("unknown method '" + mname + "' (expected spbm|adam|penalized|salm)");
    }
    json full = shallow_merge(default_method_params(pname, mname), m);
    cfg.methods.push_back(parse_method(full));
    resolved_methods.push_back(full);
  }
  for (std::size_t i = 0; i < cfg.methods.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (cfg.methods[i].label == cfg.methods[j].label) {
        throw ConfigError("config.methods: duplicate label '" + cfg.methods[i].label +
                          "'; set 'label' to tell them apart");
      }
    }
  }

  f.read("seeds", cfg.seeds);
  if (cfg.seeds.empty()) throw ConfigError("config.seeds: must be a non-empty list");
  std::size_t iters = 0, epochs = 0;
  const bool has_iters = f.has("iterations"), has_epochs = f.has("epochs");
  f.read("iterations", iters);
  f.read("epochs", epochs);
  if (has_iters == has_epochs) throw ConfigError("config: set exactly one of 'iterations' or 'epochs'");
  if (has_iters) {
    if (iters == 0) throw ConfigError("config.iterations: must be > 0");
    cfg.iterations = iters;
  } else {
    if (epochs == 0) throw ConfigError("config.epochs: must be > 0");
    cfg.epochs = epochs;
  }
  std::optional<std::size_t> batch;
  if (f.has("batch_size")) {
    std::size_t b = 0;
    f.read("batch_size", b);
    set_batch_size(cfg.problem, b);
    batch = b;
  }
  f.read("eval_every", cfg.eval_every);
  std::string out;
  f.read("out", out);
  f.read("cache_dir", cfg.cache_dir);
  f.read("timing", cfg.timing);
  f.read("threads", cfg.threads);
  if (cfg.threads == 0) throw ConfigError("config.threads: must be >= 1");
  if (const json* g = f.raw("grid")) {
    if (!g->is_object() || g->empty()) throw ConfigError("config.grid: expected a non-empty object");
    for (const auto& [k, v] : g->items()) {
      if (!v.is_array() || v.empty()) {
        throw ConfigError("config.grid." + k + ": expected a non-empty list of values");
      }
    }
    cfg.grid = *g;
  }
  f.read("grid_tolerance", cfg.grid_tolerance);
  if (!(cfg.grid_tolerance >= 0.0)) throw ConfigError("config.grid_tolerance: must be >= 0");
  f.finish();

  cfg.out = o.out ? *o.out : detail::default_out(cfg.name, out);

  json problem_echo = merged_problem;
  problem_echo["name"] = pname;
  cfg.resolved = {{"name", cfg.name},     {"problem", problem_echo}, {"methods", resolved_methods},
                  {"seeds", cfg.seeds},   {"eval_every", cfg.eval_every},
                  {"timing", cfg.timing}};
  if (cfg.iterations) cfg.resolved["iterations"] = *cfg.iterations;
  if (cfg.epochs) cfg.resolved["epochs"] = *cfg.epochs;
  if (batch) cfg.resolved["batch_size"] = *batch;
  return cfg;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
}

inline ExperimentConfig load_config(const std::string& path, const Overrides& o = {}) {
  return resolve_config(read_json_file(path), o);
}

}  // namespace spbm::harness
