#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "spbm/harness/config.hpp"
#include "spbm/harness/runner.hpp"

namespace spbm::harness {

/// Seed-averaged validation metrics of one grid point.
struct GridOutcome {
  json params;
  double val_loss = std::numeric_limits<double>::quiet_NaN();
  double val_max_constraint = std::numeric_limits<double>::quiet_NaN();
  double threshold = 0.0;
  bool ok = false;
  std::string error;
};

struct GridSelection {
  std::size_t index = 0;
  bool fallback = false;
};

/// Feasible within tolerance: the mean positive-part constraint violation is
/// at most `tolerance * threshold` (constraints are already "value minus
/// threshold", so this is "below threshold plus 10%").
inline bool grid_feasible(const GridOutcome& o, double tolerance) {
  return o.ok && o.val_max_constraint <= tolerance * o.threshold;
}

/// Lowest validation loss among feasible points; lowest validation loss
/// overall (flagged fallback) when none is feasible. Ties go to the earlier
/// point.
inline GridSelection select_grid_point(const std::vector<GridOutcome>& outcomes,
                                       double tolerance = 0.1) {
  if (outcomes.empty()) throw ConfigError("grid: no grid points");
  auto best = [&](bool require_feasible) -> std::optional<std::size_t> {
    std::optional<std::size_t> idx;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      const auto& o = outcomes[i];
      if (!o.ok || (require_feasible && !grid_feasible(o, tolerance))) continue;
      if (!idx || o.val_loss < outcomes[*idx].val_loss) idx = i;
    }
    return idx;
  };
  if (auto i = best(true)) return {*i, false};
  if (auto i = best(false)) return {*i, true};
  throw NumericError("grid: every grid point failed; first error: " + outcomes.front().error);
}

/// Cartesian product of the grid values, keys in sorted order.
inline std::vector<json> expand_grid(const json& grid) {
  std::vector<json> points{json::object()};
  for (const auto& [key, values] : grid.items()) {
    std::vector<json> next;
    for (const auto& p : points) {
      for (const auto& v : values) {
        json q = p;
        q[key] = v;
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }
  return points;
}

struct GridResult {
  std::vector<GridOutcome> outcomes;
  GridSelection selection;
  json best_config;
};

/// Runs every grid point (each in <out>/point_<k>), then writes
/// <out>/grid_results.csv and <out>/best.json.
inline GridResult grid_search(const ExperimentConfig& cfg, bool write_runs = true) {
  if (cfg.grid.is_null() || cfg.grid.empty()) throw ConfigError("grid: config has no 'grid' block");
  if (cfg.methods.size() != 1) {
    throw ConfigError("grid: configure exactly one method (use 'method', not 'methods')");
  }
  namespace fs = std::filesystem;
  GridResult result;
  std::vector<json> points = expand_grid(cfg.grid);
  std::vector<json> resolved(points.size());

  for (std::size_t k = 0; k < points.size(); ++k) {
    GridOutcome o;
    o.params = points[k];
    json raw = cfg.source;
    raw.erase("grid");
    if (raw.contains("methods")) {
      raw["method"] = raw["methods"][0];
      raw.erase("methods");
    }
    if (raw["method"].is_string()) raw["method"] = json{{"name", raw["method"]}};
    if (raw["problem"].is_string()) raw["problem"] = json{{"name", raw["problem"]}};
    try {
      for (const auto& [path, value] : points[k].items()) set_path(raw, path, value);
      Overrides ov;
      ov.out = (fs::path(cfg.out) / ("point_" + std::to_string(k))).string();
      ExperimentConfig pc = resolve_config(raw, ov);
      if (pc.cache_dir.empty()) pc.cache_dir = cfg.cache_directory();
      resolved[k] = pc.resolved;
      ExperimentResult r = run_experiment_in_memory(pc);
      if (write_runs) write_experiment(pc, r);
      std::vector<double> loss, cons;
      for (const auto& s : r.methods.front().seeds) {
        loss.push_back(s.val_loss);
        cons.push_back(s.val_max_constraint);
      }
      o.val_loss = sample_mean(loss);
      o.val_max_constraint = sample_mean(cons);
      o.threshold = r.threshold;
      o.ok = true;
    } catch (const std::exception& e) {
      o.error = e.what();
    }
    result.outcomes.push_back(std::move(o));
  }
  result.selection = select_grid_point(result.outcomes, cfg.grid_tolerance);
  result.best_config = resolved[result.selection.index];

  fs::create_directories(cfg.out);
  std::ofstream csv(fs::path(cfg.out) / "grid_results.csv", std::ios::binary);
  csv << "point";
  for (const auto& [key, v] : cfg.grid.items()) csv << ',' << key;
  csv << ",val_loss,val_max_constraint,threshold,feasible,status\n";
  for (std::size_t k = 0; k < result.outcomes.size(); ++k) {
    const auto& o = result.outcomes[k];
    csv << k;
    for (const auto& [key, v] : o.params.items()) csv << ',' << v.dump();
    csv << ',' << format_g(o.val_loss) << ',' << format_g(o.val_max_constraint) << ','
        << format_g(o.threshold) << ',' << (grid_feasible(o, cfg.grid_tolerance) ? 1 : 0) << ','
        << (o.ok ? "ok" : "failed") << '\n';
  }
  const auto& b = result.outcomes[result.selection.index];
  json best = {{"point", result.selection.index},
               {"rule", result.selection.fallback ? "fallback" : "feasible"},
               {"params", b.params},
               {"val_loss", b.val_loss},
               {"val_max_constraint", b.val_max_constraint},
               {"threshold", b.threshold},
               {"tolerance", cfg.grid_tolerance},
               {"config", result.best_config}};
  json failures = json::array();
  for (std::size_t k = 0; k < result.outcomes.size(); ++k) {
    if (!result.outcomes[k].ok) failures.push_back({{"point", k}, {"error", result.outcomes[k].error}});
  }
  best["failed_points"] = failures;
  std::ofstream(fs::path(cfg.out) / "best.json", std::ios::binary) << best.dump(2) << '\n';
  return result;
}

}  // namespace spbm::harness
