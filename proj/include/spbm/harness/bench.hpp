#pragma once

#include <algorithm>
#include <chrono>
#include <string>
#include <vector>

#include "spbm/harness/methods.hpp"
#include "spbm/harness/problems.hpp"
#include "spbm/problems/synthetic.hpp"

namespace spbm::harness {

struct BenchRow {
  std::string method;
  std::size_t m = 0;
  std::size_t iterations = 0;
  double median_s = 0.0;
  double min_s = 0.0;
};

struct BenchOptions {
  std::size_t iterations = 100;
  std::size_t warmup = 10;
  std::uint64_t seed = 0;
  problems::SyntheticPairwiseProblem::Options problem;
};

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Median per-iteration step time of each method on the synthetic pairwise
/// problem with m constraints; the parameter count is independent of m.
inline std::vector<BenchRow> bench_runtime(const std::vector<std::string>& methods,
                                           const std::vector<std::size_t>& m_values,
                                           const BenchOptions& opts = {}) {
  using Clock = std::chrono::steady_clock;
  if (opts.iterations < 1) throw ConfigError("bench: iterations must be >= 1");
  std::vector<BenchRow> rows;
  for (std::size_t m : m_values) {
    auto po = opts.problem;
    po.num_constraints = m;
    const problems::SyntheticPairwiseProblem problem(po);
    for (const auto& name : methods) {
      json params = default_method_params("synthetic-pairwise", name);
      params["name"] = name;
      const MethodSpec spec = parse_method(params);
      MethodRunner runner(spec, problem.initial_point(opts.seed), m);
      auto sampler = problem.make_sampler(opts.seed);
      std::vector<double> times;
      times.reserve(opts.iterations);
      for (std::size_t k = 0; k < opts.warmup + opts.iterations; ++k) {
        const auto batch = sampler.next();
        const auto t0 = Clock::now();
        runner.step(problem, batch);
        const double dt = std::chrono::duration<double>(Clock::now() - t0).count();
        if (k >= opts.warmup) times.push_back(dt);
      }
      rows.push_back({name, m, opts.iterations, median(times),
                      *std::min_element(times.begin(), times.end())});
    }
  }
  return rows;
}

struct AffineFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r2 = 0.0;
};

/// Least-squares y = a + b x with its coefficient of determination.
inline AffineFit fit_affine(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw ConfigError("fit_affine: need >= 2 paired points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  AffineFit f;
  f.slope = sxx > 0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  double sse = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - f.intercept - f.slope * x[i];
    sse += r * r;
  }
  f.r2 = syy > 0 ? 1.0 - sse / syy : 1.0;
  return f;
}

}  // namespace spbm::harness
