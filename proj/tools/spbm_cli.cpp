// spbm: run experiments, grid searches, reports and timing benchmarks.
//
// Exit codes: 0 success, 1 configuration error, 2 numeric failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "spbm/harness.hpp"

namespace {

namespace fs = std::filesystem;
using namespace spbm::harness;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> iters;
  std::optional<std::string> out;
  bool timing = false;
  std::optional<std::size_t> threads;

  Overrides overrides() const {
    Overrides o;
    o.seed = seed;
    o.iterations = iters;
    o.out = out;
    if (timing) o.timing = true;
    o.threads = threads;
    return o;
  }
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("config", f.config, "Experiment config (JSON)")->required();
  cmd->add_option("--seed", f.seed, "Run a single seed instead of the configured list");
  cmd->add_option("--iters", f.iters, "Iterations per run (replaces epochs/iterations)");
  cmd->add_option("--out", f.out, "Output directory (ignores " + std::string(kOutRootEnv) + ")");
  cmd->add_flag("--timing", f.timing, "Record wall_time_s (metrics are then not byte-stable)");
  cmd->add_option("--threads", f.threads, "Seeds run in parallel on this many threads");
}

int cmd_run(const CommonFlags& f) {
  const ExperimentConfig cfg = load_config(f.config, f.overrides());
  const ExperimentResult res = run_experiment(cfg);
  std::printf("%s: %s, %zu iterations (%zu per epoch), %zu seed(s)\n", cfg.name.c_str(),
              res.problem.c_str(), res.iterations, res.iterations_per_epoch, cfg.seeds.size());
  for (const auto& m : res.methods) {
    for (const auto& [metric, vals] : final_metrics(m)) {
      if (metric != "test_loss" && metric != "max_constraint" && metric != "relative_l2") continue;
      std::printf("  %-12s %-16s %s\n", m.label.c_str(), metric.c_str(),
                  format_pm(sample_mean(vals), sample_std(vals), 4).c_str());
    }
  }
  std::printf("wrote %s\n", cfg.out.c_str());
  return 0;
}

int cmd_grid(const CommonFlags& f) {
  const ExperimentConfig cfg = load_config(f.config, f.overrides());
  const GridResult g = grid_search(cfg);
  const auto& best = g.outcomes[g.selection.index];
  std::size_t failed = 0;
  for (const auto& o : g.outcomes) failed += !o.ok;
  std::printf("%zu grid points (%zu failed); selected point %zu by the %s rule: %s\n",
              g.outcomes.size(), failed, g.selection.index,
              g.selection.fallback ? "fallback (no feasible point)" : "feasible",
              best.params.dump().c_str());
  std::printf("  val_loss %.6g, val_max_constraint %.6g\nwrote %s\n", best.val_loss,
              best.val_max_constraint, cfg.out.c_str());
  return 0;
}

int cmd_report(const std::string& dir, const std::optional<std::string>& out, int precision) {
  const fs::path target = out ? fs::path(*out) : fs::path(dir) / "report";
  const auto table = report(dir, target, precision);
  std::ifstream txt(target / "summary.txt");
  std::cout << txt.rdbuf();
  std::printf("wrote %s (%zu method(s))\n", target.string().c_str(), table.size());
  return 0;
}

int cmd_bench(const std::vector<std::string>& methods, const std::vector<std::size_t>& ms,
              const BenchOptions& opts, const std::optional<std::string>& out) {
  const auto rows = bench_runtime(methods, ms, opts);
  std::printf("%-10s %6s %14s %14s\n", "method", "m", "median_s", "min_s");
  for (const auto& r : rows) {
    std::printf("%-10s %6zu %14.6e %14.6e\n", r.method.c_str(), r.m, r.median_s, r.min_s);
  }
  for (std::size_t m : ms) {
    double spbm = 0, adam = 0;
    for (const auto& r : rows) {
      if (r.m != m) continue;
      if (r.method == "spbm") spbm = r.median_s;
      if (r.method == "adam") adam = r.median_s;
    }
    if (spbm > 0 && adam > 0) std::printf("spbm/adam at m=%zu: %.2f\n", m, spbm / adam);
  }
  if (out) {
    std::ofstream csv(*out, std::ios::binary);
    if (!csv) throw spbm::ConfigError("cannot write '" + *out + "'");
    csv << "method,m,iterations,median_s,min_s\n";
    for (const auto& r : rows) {
      csv << r.method << ',' << r.m << ',' << r.iterations << ',' << format_g(r.median_s) << ','
          << format_g(r.min_s) << '\n';
    }
  }
  return 0;
}

int cmd_list() {
  for (const auto& p : problem_catalog()) std::printf("%-20s %s\n", p.name.c_str(), p.summary.c_str());
  std::printf("\nmethods: spbm adam penalized salm\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Stochastic penalty-barrier method: experiments and benchmarks"};
  app.require_subcommand(1);

  CommonFlags run_flags, grid_flags;
  auto* run = app.add_subcommand("run", "Run every method and seed of a config");
  add_common(run, run_flags);
  auto* grid = app.add_subcommand("grid", "Grid search over the config's 'grid' block");
  add_common(grid, grid_flags);

  std::string report_dir;
  std::optional<std::string> report_out;
  int precision = 3;
  auto* rep = app.add_subcommand("report", "Summary table and curve data from a results directory");
  rep->add_option("dir", report_dir, "Results directory (output of `run`)")->required();
  rep->add_option("--out", report_out, "Where to write the report (default <dir>/report)");
  rep->add_option("--precision", precision, "Digits after the decimal point")->check(CLI::Range(0, 12));

  std::vector<std::string> bench_methods{"adam", "spbm"};
  std::vector<std::size_t> bench_m{10, 100, 1000};
  BenchOptions bench_opts;
  std::optional<std::string> bench_out;
  auto* bench = app.add_subcommand("bench", "Per-iteration time against the number of constraints");
  bench->add_option("--methods", bench_methods, "Methods to time")->delimiter(',');
  bench->add_option("--m", bench_m, "Constraint counts")->delimiter(',');
  bench->add_option("--iters", bench_opts.iterations, "Timed iterations (after warm-up)")
      ->check(CLI::Range(std::size_t{1}, std::size_t{1000000}));
  bench->add_option("--warmup", bench_opts.warmup, "Untimed warm-up iterations");
  bench->add_option("--seed", bench_opts.seed, "Initialization and sampling seed");
  bench->add_option("--out", bench_out, "Also write the table as CSV");

  auto* list = app.add_subcommand("list-problems", "Registered problems and methods");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*run) return cmd_run(run_flags);
    if (*grid) return cmd_grid(grid_flags);
    if (*rep) return cmd_report(report_dir, report_out, precision);
    if (*bench) return cmd_bench(bench_methods, bench_m, bench_opts, bench_out);
    if (*list) return cmd_list();
  } catch (const spbm::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 2;
  }
  return 0;
}
