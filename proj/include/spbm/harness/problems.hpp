#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "spbm/data.hpp"
#include "spbm/harness/json_fields.hpp"
#include "spbm/problems/classification.hpp"
#include "spbm/problems/motivating.hpp"
#include "spbm/problems/pde.hpp"
#include "spbm/problems/synthetic.hpp"

namespace spbm::harness {

struct ProblemInfo {
  std::string name;
  std::string summary;
};

inline const std::vector<ProblemInfo>& problem_catalog() {
  static const std::vector<ProblemInfo> catalog{
      {"motivating", "two-disk toy problem in R^2, m = 1"},
      {"weight-norm-mlp", "MLP classifier with ||W_l||_F <= radius per layer, m = #layers"},
      {"fairness-l1", "MLP classifier, L1 group-disparity constraint, m = 1"},
      {"fairness-pairwise", "MLP classifier, pairwise group-gap constraints, m = G(G-1)"},
      {"helmholtz", "PINN for the 2-D Helmholtz equation, boundary constraint, m = 1"},
      {"burgers", "PINN for viscous Burgers, initial + boundary constraints, m = 2"},
      {"synthetic-pairwise", "random data with exactly m pairwise constraints (runtime scaling)"},
  };
  return catalog;
}

/// Where a classification dataset comes from.
struct DataSource {
  bool synthetic = true;
  std::size_t n = 4000;
  std::uint64_t seed = 0;
  data::CensusRecipe recipe;
  /// Cache generated data as CSV under the experiment's cache directory.
  bool cache = true;
  std::string path;
  data::CsvSpec csv;
};

struct ClassificationSpec {
  problems::ConstraintFamily family;
  problems::ClassificationProblem::Options options;
  DataSource data;
};

struct PinnSpec {
  bool burgers = false;
  problems::PdeSpec pde;
  std::vector<std::size_t> hidden{32, 32, 32, 32};
  problems::Activation activation = problems::Activation::kTanh;
};

struct ProblemSpec {
  std::string name;
  std::variant<problems::MotivatingProblem::Options, ClassificationSpec, PinnSpec,
               problems::SyntheticPairwiseProblem::Options>
      options;
};

// ---------------------------------------------------------------------------
// Defaults

inline bool known_problem(const std::string& name) {
  for (const auto& p : problem_catalog()) {
    if (p.name == name) return true;
  }
  return false;
}

inline void require_known_problem(const std::string& name) {
  if (known_problem(name)) return;
  std::string list;
  for (const auto& p : problem_catalog()) list += (list.empty() ? "" : "|") + p.name;
  throw ConfigError("unknown problem '" + name + "' (expected " + list + ")");
}

inline json default_problem_params(const std::string& name) {
  require_known_problem(name);
  const json synth = {{"source", "synthetic"}, {"n", 4000}, {"seed", 0}};
  if (name == "motivating") return {{"batch_size", 2}, {"full_batch", true}, {"x0", {0.5, 0.5}}};
  if (name == "weight-norm-mlp") {
    return {{"data", synth}, {"hidden", {64, 32}}, {"activation", "relu"},
            {"weight_radius", 4.0}, {"batch_size", 64}, {"split_seed", 0}};
  }
  if (name == "fairness-l1" || name == "fairness-pairwise") {
    return {{"data", synth},       {"hidden", {64, 16}},  {"activation", "relu"},
            {"statistic", "loss"}, {"eps_tol", 0.1},      {"batch_size", 64},
            {"split_seed", 0}};
  }
  if (name == "helmholtz" || name == "burgers") {
    return {{"hidden", {32, 32, 32, 32}}, {"activation", "tanh"}, {"fd_step", 1e-3},
            {"eps_pinn", 1e-4}, {"interior_batch", 256}, {"boundary_batch", 64},
            {"initial_batch", 64}, {"eval_interior", 1000}, {"eval_boundary", 256}};
  }
  return {{"num_constraints", 10}, {"num_features", 10}, {"hidden", {32}},
          {"batch_size", 132},     {"rows_per_group", 40}, {"eps_tol", 0.05},
          {"data_seed", 7}};
}

/// Method hyperparameters per problem, taken from the final tuned settings
/// of the corresponding benchmark where one exists.
inline json default_method_params(const std::string& problem, const std::string& method) {
  require_known_problem(problem);
  const bool decay = problem != "motivating" && problem != "weight-norm-mlp";
  const double wd = decay ? 0.01 : 0.0;
  auto adaptive = [](double k) { return json{{"type", "adaptive"}, {"k", k}}; };

  json spbm = {{"alpha", 1e-3}, {"gamma", 0.9}, {"mu", 0.0}, {"delta", 0.9},
               {"barrier", "ql"}, {"schedule", "identity"}, {"weight_decay", wd}};
  json adam = {{"alpha", 1e-3}, {"weight_decay", wd}};
  json penalized = {{"rho", 1.0}, {"lr", 1e-3}, {"weight_decay", wd}};
  json salm = {{"lr", 1e-3}, {"dual_lr", 1e-2}, {"rho", 1.0}, {"mu", 0.0}, {"weight_decay", wd}};

  if (problem == "motivating") {
    spbm.update({{"alpha", 1e-2}, {"gamma", 0.9}, {"mu", 1.0}, {"delta", 0.9}});
    adam["alpha"] = 1e-2;
    penalized["lr"] = 1e-2;
    salm.update({{"lr", 1e-2}, {"dual_lr", 0.1}});
  } else if (problem == "weight-norm-mlp") {
    spbm.update({{"gamma", 0.95}, {"mu", 2.0}, {"schedule", adaptive(0.1)}});
    salm.update({{"dual_lr", 0.1}, {"rho", 1.0}, {"mu", 2.0}});
  } else if (problem == "fairness-l1") {
    spbm.update({{"gamma", 0.1}, {"mu", 2.0}, {"schedule", adaptive(0.999)}});
    salm.update({{"lr", 1e-4}, {"dual_lr", 1e-3}, {"rho", 1.0}, {"mu", 1.0}});
  } else if (problem == "fairness-pairwise") {
    spbm.update({{"alpha", 5e-4}, {"gamma", 0.9}, {"mu", 1.0}, {"schedule", adaptive(0.999)}});
    salm.update({{"dual_lr", 5e-3}, {"rho", 0.0}, {"mu", 1.0}});
  } else if (problem == "helmholtz") {
    spbm.update({{"alpha", 5e-4}, {"gamma", 0.2}, {"mu", 0.0}, {"schedule", adaptive(0.99)}});
    penalized.update({{"rho", 5.0}, {"form", "linear"}});
    salm.update({{"dual_lr", 5e-3}, {"rho", 1.0}, {"mu", 1.0}});
  } else if (problem == "burgers") {
    spbm.update({{"alpha", 1e-3}, {"gamma", 0.1}, {"mu", 0.0}, {"schedule", adaptive(0.999)}});
    adam["alpha"] = 5e-3;
    penalized.update({{"rho", 5.0}, {"form", "linear"}, {"lr", 5e-3}});
    salm.update({{"lr", 5e-4}, {"dual_lr", 1e-2}, {"rho", 1.0}, {"mu", 1.0}});
  }

  if (method == "spbm") return spbm;
  if (method == "adam") return adam;
  if (method == "penalized") return penalized;
  if (method == "salm") return salm;
  throw ConfigError("unknown method '" + method + "' (expected spbm|adam|penalized|salm)");
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

inline DataSource parse_data(const json& j) {
  DataSource d;
  Fields f(j, "problem.data");
  std::string source = "synthetic";
  f.read("source", source);
  if (source == "synthetic") {
    f.read("n", d.n);
    f.read("seed", d.seed);
    f.read("cache", d.cache);
    f.read("num_features", d.recipe.num_features);
    f.read("sharpness", d.recipe.sharpness);
    if (const json* groups = f.raw("groups")) {
      if (!groups->is_array()) throw ConfigError("problem.data.groups: expected an array");
      d.recipe.groups.clear();
      for (const auto& g : *groups) {
        Fields gf(g, "problem.data.groups[]");
        data::GroupRecipe r;
        gf.read("name", r.name);
        gf.read("fraction", r.fraction);
        gf.read("shift", r.shift);
        gf.finish();
        d.recipe.groups.push_back(r);
      }
    }
  } else if (source == "csv") {
    d.synthetic = false;
    f.read("path", d.path);
    f.read("label", d.csv.label_column);
    f.read("groups", d.csv.group_columns);
    f.read("categorical", d.csv.categorical_columns);
    if (d.path.empty()) throw ConfigError("problem.data.path: required for csv data");
    if (d.csv.label_column.empty()) throw ConfigError("problem.data.label: required for csv data");
  } else {
    throw ConfigError("problem.data.source: expected synthetic|csv, got '" + source + "'");
  }
  f.finish();
  return d;
}

}  // namespace detail

/// Parses the `problem` block, merged over the problem's defaults.
inline ProblemSpec parse_problem(const std::string& name, const json& params) {
  require_known_problem(name);
  ProblemSpec spec{name, {}};
  Fields f(params, "problem");
  if (name == "motivating") {
    problems::MotivatingProblem::Options o;
    f.read("batch_size", o.batch_size);
    f.read("full_batch", o.full_batch);
    f.read("x0", o.x0);
    if (o.x0.size() != 2) throw ConfigError("problem.x0: expected 2 entries");
    if (o.batch_size == 0) throw ConfigError("problem.batch_size: must be >= 1");
    spec.options = o;
  } else if (name == "helmholtz" || name == "burgers") {
    PinnSpec p;
    p.burgers = name == "burgers";
    std::string act = "tanh";
    f.read("hidden", p.hidden);
    f.read("activation", act);
    f.read("fd_step", p.pde.fd_step);
    f.read("eps_pinn", p.pde.eps_pinn);
    f.read("interior_batch", p.pde.interior_batch);
    f.read("boundary_batch", p.pde.boundary_batch);
    f.read("initial_batch", p.pde.initial_batch);
    f.read("eval_interior", p.pde.eval_interior);
    f.read("eval_boundary", p.pde.eval_boundary);
    p.activation = problems::parse_activation(act);
    p.pde.validate();
    spec.options = p;
  } else if (name == "synthetic-pairwise") {
    problems::SyntheticPairwiseProblem::Options o;
    f.read("num_constraints", o.num_constraints);
    f.read("num_features", o.num_features);
    f.read("hidden", o.hidden);
    f.read("batch_size", o.batch_size);
    f.read("rows_per_group", o.rows_per_group);
    f.read("eps_tol", o.eps_tol);
    f.read("data_seed", o.data_seed);
    if (o.num_features == 0 || o.batch_size == 0 || o.rows_per_group == 0) {
      throw ConfigError("problem: num_features, batch_size and rows_per_group must be positive");
    }
    spec.options = o;
  } else {
    ClassificationSpec c;
    c.family = name == "weight-norm-mlp"  ? problems::ConstraintFamily::kWeightNorm
               : name == "fairness-l1"    ? problems::ConstraintFamily::kFairnessL1
                                          : problems::ConstraintFamily::kFairnessPairwise;
    c.options.family = c.family;
    std::string act = "relu", stat = "loss";
    if (const json* d = f.raw("data")) c.data = detail::parse_data(*d);
    f.read("hidden", c.options.hidden);
    f.read("activation", act);
    f.read("batch_size", c.options.batch_size);
    f.read("split_seed", c.options.split_seed);
    if (c.family == problems::ConstraintFamily::kWeightNorm) {
      f.read("weight_radius", c.options.weight_radius);
    } else {
      f.read("statistic", stat);
      f.read("eps_tol", c.options.eps_tol);
    }
    c.options.activation = problems::parse_activation(act);
    c.options.statistic = problems::parse_statistic(stat);
    if (c.options.batch_size == 0) throw ConfigError("problem.batch_size: must be >= 1");
    spec.options = c;
  }
  f.finish();
  return spec;
}

/// Overrides the training batch size (interior batch for PINNs).
inline void set_batch_size(ProblemSpec& spec, std::size_t b) {
  if (b == 0) throw ConfigError("batch_size: must be >= 1");
  std::visit(
      [b](auto& o) {
        using O = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<O, ClassificationSpec>) {
          o.options.batch_size = b;
        } else if constexpr (std::is_same_v<O, PinnSpec>) {
          o.pde.interior_batch = b;
        } else {
          o.batch_size = b;
        }
      },
      spec.options);
}

// ---------------------------------------------------------------------------
// Construction

/// FNV-1a over a string.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// Bump when synth_census changes so stale cache files are not reused.
inline constexpr int kSynthGeneratorVersion = 2;

inline json recipe_json(const data::CensusRecipe& r) {
  json groups = json::array();
  for (const auto& g : r.groups) {
    groups.push_back({{"name", g.name}, {"fraction", g.fraction}, {"shift", g.shift}});
  }
  return {{"groups", groups}, {"num_features", r.num_features}, {"sharpness", r.sharpness}};
}

/// Synthetic data keyed by (seed, recipe hash); loaded from `cache_dir`
/// when a matching file exists, generated and written otherwise.
inline data::Dataset load_dataset(const DataSource& src, const std::string& cache_dir) {
  if (!src.synthetic) return data::load_csv(src.path, src.csv);
  if (!src.cache || cache_dir.empty()) return data::synth_census(src.seed, src.n, src.recipe);

  json key = recipe_json(src.recipe);
  key["n"] = src.n;
  key["generator"] = kSynthGeneratorVersion;
  char name[96];
  std::snprintf(name, sizeof name, "synth_seed%llu_%016llx.csv",
                static_cast<unsigned long long>(src.seed),
                static_cast<unsigned long long>(fnv1a(key.dump())));
  const std::filesystem::path path = std::filesystem::path(cache_dir) / name;

  data::Dataset ds;
  if (std::filesystem::exists(path)) {
    ds = data::load_csv(path.string(), {.label_column = "label", .group_columns = {"group"}});
    // The reader orders group levels by name; restore recipe order.
    std::vector<std::size_t> remap(ds.num_groups());
    std::vector<std::string> names;
    for (const auto& g : src.recipe.groups) names.push_back(g.name);
    for (std::size_t g = 0; g < ds.num_groups(); ++g) {
      auto it = std::find(names.begin(), names.end(), ds.group_names[g]);
      if (it == names.end() || ds.num_groups() != names.size()) {
        throw ConfigError("dataset cache '" + path.string() + "' does not match its recipe");
      }
      remap[g] = static_cast<std::size_t>(it - names.begin());
    }
    for (auto& g : ds.groups) g = remap[g];
    ds.group_names = names;
    ds.validate();
    return ds;
  }
  ds = data::synth_census(src.seed, src.n, src.recipe);
  std::filesystem::create_directories(cache_dir);
  // Write then rename so concurrent runs never read a partial file.
  const auto tmp = path.string() + ".tmp" + std::to_string(std::random_device{}());
  data::write_csv(ds, tmp);
  std::filesystem::rename(tmp, path);
  return ds;
}

/// Builds the concrete problem and calls `f(problem)`.
template <class F>
decltype(auto) with_problem(const ProblemSpec& spec, const std::string& cache_dir, F&& f) {
  using problems::MlpSpec;
  return std::visit(
      [&](const auto& o) -> decltype(auto) {
        using O = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<O, problems::MotivatingProblem::Options>) {
          const problems::MotivatingProblem p(o);
          return f(p);
        } else if constexpr (std::is_same_v<O, ClassificationSpec>) {
          const problems::ClassificationProblem p(load_dataset(o.data, cache_dir), o.options);
          return f(p);
        } else if constexpr (std::is_same_v<O, PinnSpec>) {
          MlpSpec net;
          net.widths.push_back(2);
          net.widths.insert(net.widths.end(), o.hidden.begin(), o.hidden.end());
          net.widths.push_back(1);
          net.activation = o.activation;
          if (o.burgers) {
            const problems::BurgersProblem p(o.pde, net);
            return f(p);
          } else {
            const problems::HelmholtzProblem p(o.pde, net);
            return f(p);
          }
        } else {
          const problems::SyntheticPairwiseProblem p(o);
          return f(p);
        }
      },
      spec.options);
}

}  // namespace spbm::harness
