#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "spbm/errors.hpp"
#include "spbm/harness/config.hpp"
#include "spbm/harness/methods.hpp"
#include "spbm/problem.hpp"

namespace spbm::harness {

inline constexpr const char* kMetricsHeader =
    "seed,iter,train_loss,test_loss,mean_constraint,max_constraint,lambda_norm,p_min,p_max,"
    "prox_dist,wall_time_s";

struct MetricsRow {
  std::uint64_t seed = 0;
  std::size_t iter = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  /// Mean and max of the positive parts max(g_i, 0) on the test partition.
  double mean_constraint = 0.0;
  double max_constraint = 0.0;
  double lambda_norm = 0.0;
  double p_min = 0.0;
  double p_max = 0.0;
  double prox_dist = 0.0;
  double wall_time_s = 0.0;
};

inline std::string format_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_row(const MetricsRow& r) {
  std::string s = std::to_string(r.seed) + ',' + std::to_string(r.iter);
  for (double v : {r.train_loss, r.test_loss, r.mean_constraint, r.max_constraint, r.lambda_norm,
                   r.p_min, r.p_max, r.prox_dist, r.wall_time_s}) {
    s += ',' + format_g(v);
  }
  return s;
}

/// (mean, max) of the positive parts; zeros when there are no constraints.
inline std::pair<double, double> positive_part_stats(std::span<const double> g) {
  if (g.empty()) return {0.0, 0.0};
  double sum = 0.0, mx = 0.0;
  for (double v : g) {
    const double pos = std::max(v, 0.0);
    sum += pos;
    mx = std::max(mx, pos);
  }
  return {sum / static_cast<double>(g.size()), mx};
}

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<MetricsRow> rows;
  double val_loss = 0.0;
  double val_mean_constraint = 0.0;
  double val_max_constraint = 0.0;
  /// Raw validation constraint values g_i (not clipped).
  std::vector<double> val_constraints;
  std::vector<double> test_constraints;
  std::optional<double> relative_l2;
  std::vector<double> x;
};

struct MethodResult {
  std::string label;
  std::string method;
  std::vector<SeedResult> seeds;
};

struct ExperimentResult {
  std::string problem;
  std::size_t iterations = 0;
  std::size_t iterations_per_epoch = 0;
  std::size_t eval_every = 0;
  double threshold = 0.0;
  std::vector<MethodResult> methods;
};

/// Called after every step with (seed, iteration, x), possibly from several
/// threads at once when seeds run in parallel.
using StepObserver = std::function<void(std::uint64_t, std::size_t, std::span<const double>)>;

struct RunOptions {
  std::size_t iterations = 0;
  std::size_t eval_every = 0;
  bool timing = false;
  StepObserver observer;
};

namespace detail {

template <class P>
concept HasRelativeL2 = requires(const P& p, std::span<const double> x) {
  { p.relative_l2_error(x) } -> std::convertible_to<double>;
};

inline void require_finite_metric(double v, const char* what, std::size_t iter) {
  if (!std::isfinite(v)) {
    throw NumericError(std::string("non-finite ") + what + " at iteration " + std::to_string(iter));
  }
}

template <class Fn>
auto with_context(const std::string& ctx, Fn&& fn) {
  try {
    return fn();
  } catch (const NumericError& e) {
    throw NumericError(ctx + ": " + e.what(), e.index());
  } catch (const DomainError& e) {
    throw NumericError(ctx + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(ctx + ": " + e.what());
  }
}

}  // namespace detail

/// Runs one method on one seed and returns its metric rows.
template <RunnableProblem P>
SeedResult run_seed(const P& problem, const MethodSpec& method, std::uint64_t seed,
                    const RunOptions& opts) {
  using Clock = std::chrono::steady_clock;
  const std::size_t every = opts.eval_every ? opts.eval_every : problem.iterations_per_epoch();
  const auto train = problem.eval_batch(Partition::kTrain);
  const auto test = problem.eval_batch(Partition::kTest);

  MethodRunner runner(method, problem.initial_point(seed), problem.num_constraints());
  auto sampler = problem.make_sampler(seed);
  SeedResult res;
  res.seed = seed;
  double elapsed = 0.0;

  auto log = [&](std::size_t iter) {
    const Evaluation tr = evaluate(problem, runner.x(), train);
    const Evaluation te = evaluate(problem, runner.x(), test);
    MetricsRow row;
    row.seed = seed;
    row.iter = iter;
    row.train_loss = tr.objective;
    row.test_loss = te.objective;
    std::tie(row.mean_constraint, row.max_constraint) = positive_part_stats(te.constraints);
    const Diagnostics d = runner.diagnostics();
    row.lambda_norm = d.lambda_norm;
    row.p_min = d.p_min;
    row.p_max = d.p_max;
    row.prox_dist = d.prox_dist;
    row.wall_time_s = opts.timing ? elapsed : 0.0;
    detail::require_finite_metric(row.train_loss, "train loss", iter);
    detail::require_finite_metric(row.test_loss, "test loss", iter);
    detail::require_finite_metric(row.max_constraint, "test constraint", iter);
    res.test_constraints = te.constraints;
    res.rows.push_back(row);
  };

  log(0);
  for (std::size_t k = 1; k <= opts.iterations; ++k) {
    const auto t0 = opts.timing ? Clock::now() : Clock::time_point{};
    runner.step(problem, sampler.next());
    if (opts.timing) elapsed += std::chrono::duration<double>(Clock::now() - t0).count();
    if (opts.observer) opts.observer(seed, k, runner.x());
    if (k % every == 0 || k == opts.iterations) log(k);
  }

  const Evaluation val = evaluate(problem, runner.x(), problem.eval_batch(Partition::kValidation));
  detail::require_finite_metric(val.objective, "validation loss", opts.iterations);
  res.val_loss = val.objective;
  res.val_constraints = val.constraints;
  std::tie(res.val_mean_constraint, res.val_max_constraint) = positive_part_stats(val.constraints);
  if constexpr (detail::HasRelativeL2<P>) res.relative_l2 = problem.relative_l2_error(runner.x());
  res.x.assign(runner.x().begin(), runner.x().end());
  return res;
}

/// Runs `jobs` independent tasks on up to `threads` threads. The first
/// failure (in job order) is rethrown after all tasks finish.
inline void run_parallel(std::size_t jobs, std::size_t threads,
                         const std::function<void(std::size_t)>& task) {
  std::vector<std::exception_ptr> errors(jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs; j = next++) {
      try {
        task(j);
      } catch (...) {
        errors[j] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::min(std::max<std::size_t>(threads, 1), jobs);
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

template <RunnableProblem P>
ExperimentResult run_on_problem(const P& problem, const ExperimentConfig& cfg,
                                const StepObserver& observer = {}) {
  ExperimentResult out;
  out.problem = cfg.problem.name;
  out.iterations_per_epoch = problem.iterations_per_epoch();
  out.iterations = cfg.iterations ? *cfg.iterations : *cfg.epochs * out.iterations_per_epoch;
  out.eval_every = cfg.eval_every ? cfg.eval_every : out.iterations_per_epoch;
  out.threshold = problem.constraint_threshold();
  const RunOptions opts{out.iterations, out.eval_every, cfg.timing, observer};

  for (const MethodSpec& m : cfg.methods) {
    MethodResult mr{m.label, m.name, std::vector<SeedResult>(cfg.seeds.size())};
    run_parallel(cfg.seeds.size(), cfg.threads, [&](std::size_t j) {
      const std::string ctx = "method '" + m.label + "', seed " + std::to_string(cfg.seeds[j]);
      mr.seeds[j] = detail::with_context(ctx, [&] { return run_seed(problem, m, cfg.seeds[j], opts); });
    });
    out.methods.push_back(std::move(mr));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output files

inline double sample_mean(std::span<const double> v) {
  double s = 0.0;
  for (double a : v) s += a;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

/// Sample standard deviation (n - 1); zero for a single value.
inline double sample_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = sample_mean(v);
  double s = 0.0;
  for (double a : v) s += (a - m) * (a - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

inline void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRow> rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << kMetricsHeader << '\n';
  for (const auto& r : rows) out << format_row(r) << '\n';
}

/// Final-row metrics summarized over seeds: (metric, values).
inline std::vector<std::pair<std::string, std::vector<double>>> final_metrics(const MethodResult& m) {
  std::vector<std::pair<std::string, std::vector<double>>> cols{
      {"train_loss", {}}, {"test_loss", {}}, {"mean_constraint", {}}, {"max_constraint", {}},
      {"val_loss", {}},   {"val_max_constraint", {}}};
  bool l2 = !m.seeds.empty() && m.seeds.front().relative_l2.has_value();
  if (l2) cols.push_back({"relative_l2", {}});
  for (const auto& s : m.seeds) {
    const MetricsRow& r = s.rows.back();
    cols[0].second.push_back(r.train_loss);
    cols[1].second.push_back(r.test_loss);
    cols[2].second.push_back(r.mean_constraint);
    cols[3].second.push_back(r.max_constraint);
    cols[4].second.push_back(s.val_loss);
    cols[5].second.push_back(s.val_max_constraint);
    if (l2) cols[6].second.push_back(s.relative_l2.value_or(0.0));
  }
  return cols;
}

/// Writes <out>/<label>/seed_<s>.csv, <out>/<label>/run.json and
/// <out>/summary.{csv,txt}.
inline void write_experiment(const ExperimentConfig& cfg, const ExperimentResult& res) {
  namespace fs = std::filesystem;
  const fs::path root(cfg.out);
  fs::create_directories(root);
  std::ofstream csv(root / "summary.csv", std::ios::binary);
  std::ofstream txt(root / "summary.txt", std::ios::binary);
  if (!csv || !txt) throw ConfigError("cannot write summary under '" + root.string() + "'");
  csv << "method,metric,mean,std,n\n";
  char line[256];
  std::snprintf(line, sizeof line, "%-14s %-20s %22s %22s %3s\n", "method", "metric", "mean", "std", "n");
  txt << line;

  for (const auto& m : res.methods) {
    const fs::path dir = root / m.label;
    fs::create_directories(dir);
    json seeds = json::array();
    for (const auto& s : m.seeds) {
      write_metrics_csv(dir / ("seed_" + std::to_string(s.seed) + ".csv"), s.rows);
      json fin = {{"val_loss", s.val_loss},
                  {"val_mean_constraint", s.val_mean_constraint},
                  {"val_max_constraint", s.val_max_constraint},
                  {"val_constraints", s.val_constraints},
                  {"test_constraints", s.test_constraints}};
      // Undo the threshold shift: ||W||_F for weight-norm, the group gap for fairness.
      std::vector<double> raw = s.test_constraints;
      for (double& v : raw) v += res.threshold;
      fin["test_constraint_values"] = raw;
      if (s.relative_l2) fin["relative_l2"] = *s.relative_l2;
      seeds.push_back({{"seed", s.seed}, {"final", fin}});
    }
    json run = {{"method", m.method},
                {"label", m.label},
                {"problem", res.problem},
                {"iterations", res.iterations},
                {"iterations_per_epoch", res.iterations_per_epoch},
                {"eval_every", res.eval_every},
                {"constraint_threshold", res.threshold},
                {"config", cfg.resolved},
                {"seeds", seeds}};
    std::ofstream(dir / "run.json", std::ios::binary) << run.dump(2) << '\n';

    for (const auto& [metric, vals] : final_metrics(m)) {
      const double mean = sample_mean(vals), sd = sample_std(vals);
      csv << m.label << ',' << metric << ',' << format_g(mean) << ',' << format_g(sd) << ','
          << vals.size() << '\n';
      std::snprintf(line, sizeof line, "%-14s %-20s %22.10g %22.10g %3zu\n", m.label.c_str(),
                    metric.c_str(), mean, sd, vals.size());
      txt << line;
    }
  }
}

/// Builds the problem once and runs every method and seed. Does not write.
inline ExperimentResult run_experiment_in_memory(const ExperimentConfig& cfg,
                                                 const StepObserver& observer = {}) {
  return with_problem(cfg.problem, cfg.cache_directory(), [&](const auto& problem) {
    return run_on_problem(problem, cfg, observer);
  });
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  ExperimentResult res = run_experiment_in_memory(cfg);
  write_experiment(cfg, res);
  return res;
}

}  // namespace spbm::harness
