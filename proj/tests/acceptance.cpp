// Acceptance checks: one PASS/FAIL line per criterion, tolerances fixed here.
// Exit status is the number of failed criteria (capped at 255).

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "spbm/harness.hpp"

namespace {

namespace fs = std::filesystem;
using namespace spbm;
using namespace spbm::harness;
using problems::ClassificationProblem;
using problems::MotivatingProblem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double mean_of(const std::vector<double>& v) { return sample_mean(v); }

// ---------------------------------------------------------------------------
// 1. Barrier exactness

Outcome barrier_exactness() {
  constexpr double tol = 1e-12;
  const auto QL = BarrierKind::kQuadraticLog, QR = BarrierKind::kQuadraticReciprocal;
  const double b = -1.0 / 3.0;
  struct Pt {
    const char* what;
    double got, want;
  };
  const std::vector<Pt> pts{
      {"QL phi(-1/2) quadratic", spbm::detail::quadratic_branch(-0.5), -3.0 / 8.0},
      {"QL phi(-1/2) log", spbm::detail::log_branch(-0.5), -3.0 / 8.0},
      {"QL phi'(-1/2) quadratic", spbm::detail::quadratic_slope(-0.5), 0.5},
      {"QL phi'(-1/2) log", spbm::detail::log_slope(-0.5), 0.5},
      {"QL phi(-1/2)", phi(QL, -0.5), -3.0 / 8.0},
      {"QL phi'(-1/2)", phi_prime(QL, -0.5), 0.5},
      {"QR phi(-1/3) quadratic", spbm::detail::quadratic_branch(b), -5.0 / 18.0},
      {"QR phi(-1/3) reciprocal", spbm::detail::reciprocal_branch(b), -5.0 / 18.0},
      {"QR phi'(-1/3) quadratic", spbm::detail::quadratic_slope(b), 2.0 / 3.0},
      {"QR phi'(-1/3) reciprocal", spbm::detail::reciprocal_slope(b), 2.0 / 3.0},
      {"QR phi(-1/3)", phi(QR, b), -5.0 / 18.0},
      {"QR phi'(-1/3)", phi_prime(QR, b), 2.0 / 3.0},
  };
  double worst = 0.0;
  for (const auto& p : pts) {
    const double e = std::abs(p.got - p.want);
    worst = std::max(worst, e);
    if (!(e <= tol)) return {false, fmt("%s = %.17g, expected %.17g", p.what, p.got, p.want)};
  }
  std::size_t checked = 0;
  for (BarrierKind k : {QL, QR}) {
    for (double p : {0.1, 0.3, 1.0}) {
      for (int i = 0; i <= 20000; ++i) {
        const double t = -10.0 + 20.0 * i / 20000.0;
        if ((transformed_constraint(k, t, p) <= 0.0) != (t <= 0.0)) {
          return {false, fmt("sign equivalence fails at t=%.17g p=%g", t, p)};
        }
        ++checked;
      }
    }
  }
  return {true, fmt("max breakpoint error %.1e; sign equivalence on %zu (t, p) points", worst, checked)};
}

// ---------------------------------------------------------------------------
// 2. Gradient correctness

/// Relative error ||y_S - fd_S|| / ||fd_S|| of the SPBM direction against
/// central differences of the proximal Lagrangian, over sampled coordinates S.
template <Problem P>
double direction_error(const P& prob, const typename P::Batch& batch, std::vector<double> x,
                       BarrierKind kind, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t m = prob.num_constraints();
  SpbmConfig cfg{.gamma = 0.3 + 0.6 * u(rng), .mu = 0.1 + 2.0 * u(rng), .barrier = kind,
                 .schedule = AdaptiveSchedule{.k_adapt = 0.1 + 0.8 * u(rng)}};
  for (std::size_t i = 0; i < m; ++i) cfg.lambda0.push_back(0.2 + 2.0 * u(rng));
  SpbmState st = SpbmState::init(x, m, cfg);
  for (double& s : st.s) s += 0.3 * (u(rng) - 0.5);
  for (double& p : st.p) p = 0.1 + 0.9 * u(rng);
  const SpbmDirection d = spbm_direction(st, cfg, prob, batch);

  auto lagrangian = [&](const std::vector<double>& z) {
    const Evaluation e = evaluate(prob, z, batch);
    double l = e.objective;
    for (std::size_t i = 0; i < m; ++i) l += d.lambda[i] * transformed_constraint(kind, e.constraints[i], d.p[i]);
    for (std::size_t i = 0; i < z.size(); ++i) l += 0.5 * cfg.mu * (z[i] - st.s[i]) * (z[i] - st.s[i]);
    return l;
  };
  std::vector<std::size_t> coords(x.size());
  for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
  std::shuffle(coords.begin(), coords.end(), rng);
  coords.resize(std::min<std::size_t>(coords.size(), 12));
  double num = 0.0, den = 0.0;
  for (std::size_t i : coords) {
    const double h = 1e-4 * std::max(1.0, std::abs(x[i]));
    auto zp = x, zm = x;
    zp[i] += h;
    zm[i] -= h;
    const double fd = (lagrangian(zp) - lagrangian(zm)) / (2 * h);
    num += (d.y[i] - fd) * (d.y[i] - fd);
    den += fd * fd;
  }
  return std::sqrt(num / std::max(den, 1e-300));
}

Outcome gradient_correctness() {
  constexpr double tol = 1e-4;
  std::mt19937_64 rng(2024);
  const auto ds = data::synth_census(11, 300);
  const char* names[] = {"weight-norm", "fairness-l1", "fairness-pairwise", "helmholtz", "burgers",
                         "motivating", "synthetic-pairwise"};
  std::vector<double> worst(7, 0.0);
  for (int inst = 0; inst < 20; ++inst) {
    const BarrierKind kind = inst % 2 == 0 ? BarrierKind::kQuadraticLog : BarrierKind::kQuadraticReciprocal;
    const int family = inst % 7;
    const std::uint64_t seed = 100 + static_cast<std::uint64_t>(inst);
    double err = 0.0;
    if (family <= 2) {
      const problems::ConstraintFamily fam[] = {problems::ConstraintFamily::kWeightNorm,
                                                problems::ConstraintFamily::kFairnessL1,
                                                problems::ConstraintFamily::kFairnessPairwise};
      ClassificationProblem prob(ds, {.hidden = {6}, .activation = problems::Activation::kTanh,
                                      .family = fam[family],
                                      .statistic = problems::GroupStatistic::kPositiveRate,
                                      .eps_tol = 0.02, .weight_radius = 0.5, .batch_size = 40});
      err = direction_error(prob, prob.make_sampler(seed).next(), prob.initial_point(seed), kind, rng);
    } else if (family == 3) {
      problems::HelmholtzProblem prob({.interior_batch = 16, .boundary_batch = 8, .eval_interior = 16,
                                       .eval_boundary = 8},
                                      {{2, 8, 8, 1}, problems::Activation::kTanh});
      err = direction_error(prob, prob.make_sampler(seed).next(), prob.initial_point(seed), kind, rng);
    } else if (family == 4) {
      problems::BurgersProblem prob({.interior_batch = 16, .boundary_batch = 8, .initial_batch = 8,
                                     .eval_interior = 16, .eval_boundary = 8},
                                    {{2, 8, 8, 1}, problems::Activation::kTanh});
      err = direction_error(prob, prob.make_sampler(seed).next(), prob.initial_point(seed), kind, rng);
    } else if (family == 5) {
      const MotivatingProblem prob;
      std::uniform_real_distribution<double> u(-3.0, 3.0);
      err = direction_error(prob, MotivatingProblem::full_batch(), {u(rng), u(rng)}, kind, rng);
    } else {
      problems::SyntheticPairwiseProblem prob({.num_constraints = 6, .hidden = {5}, .batch_size = 24,
                                               .rows_per_group = 12});
      err = direction_error(prob, prob.make_sampler(seed).next(), prob.initial_point(seed), kind, rng);
    }
    worst[family] = std::max(worst[family], err);
    if (!(err <= tol)) {
      return {false, fmt("instance %d (%s, %s): relative error %.3e > %.0e", inst, names[family],
                         to_string(kind).data(), err, tol)};
    }
  }
  std::string d = "20 instances, worst relative error per family:";
  for (int f = 0; f < 7; ++f) d += fmt(" %s %.1e", names[f], worst[f]);
  return {true, d};
}

// ---------------------------------------------------------------------------
// 3. Reduction to Adam

/// A problem with its constraints dropped.
template <Problem P>
struct Unconstrained {
  using Batch = typename P::Batch;
  const P& inner;
  std::size_t dim() const { return inner.dim(); }
  std::size_t num_constraints() const { return 0; }
  Recorded record(ad::Tape& t, std::span<const double> x, const Batch& b) const {
    Recorded r = inner.record(t, x, b);
    r.constraints.clear();
    return r;
  }
};

Outcome reduction() {
  constexpr double tol = 1e-12;
  const ClassificationProblem base(data::synth_census(3, 300),
                                   {.hidden = {8}, .activation = problems::Activation::kTanh,
                                    .family = problems::ConstraintFamily::kFairnessPairwise,
                                    .batch_size = 30});
  const Unconstrained<ClassificationProblem> prob{base};
  const SpbmConfig cfg{.alpha = 1e-2, .gamma = 0.9, .mu = 0.0, .schedule = AdaptiveSchedule{}};
  const std::vector<double> x0 = base.initial_point(1);
  SpbmState st = SpbmState::init(x0, 0, cfg);
  AdamState adam = AdamState::zeros(x0.size());
  std::vector<double> x = x0;
  auto sampler = base.make_sampler(1);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const auto batch = sampler.next();
    st = spbm_step(st, cfg, prob, batch);
    ad::Tape tape;
    const ad::Gradient g = tape.backward(prob.record(tape, x, batch).objective);
    x = one_step_adam(adam, x, g, cfg.adam());
    for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(st.x[i] - x[i]));
    if (!(worst <= tol)) return {false, fmt("step %d: max |x_spbm - x_adam| = %.3e", k, worst)};
  }
  return {true, fmt("100 steps, %zu parameters, max deviation %.1e", x0.size(), worst)};
}

// ---------------------------------------------------------------------------
// 4. Motivating example

Outcome motivating(const fs::path& out) {
  json c = {{"name", "motivating"},
            {"problem", {{"name", "motivating"}, {"full_batch", true}, {"x0", {0.5, 0.5}}}},
            {"methods",
             {{{"name", "spbm"}, {"alpha", 1e-2}, {"gamma", 0.9}, {"mu", 1.0}, {"delta", 0.9},
               {"barrier", "ql"}, {"schedule", "identity"}},
              {{"name", "penalized"}, {"label", "penalized_rho0"}, {"rho", 0.0}, {"lr", 1e-2}},
              {{"name", "penalized"}, {"label", "penalized_rho1"}, {"rho", 1.0}, {"lr", 1e-2}},
              {{"name", "penalized"}, {"label", "penalized_rho2.5"}, {"rho", 2.5}, {"lr", 1e-2}}}},
            {"seeds", {0}},
            {"iterations", 5000},
            {"eval_every", 50}};
  const ExperimentConfig cfg = resolve_config(c, Overrides{.out = (out / "motivating").string()});

  // The observer sees every iterate of every method in order.
  std::vector<std::vector<std::array<double, 2>>> traj(cfg.methods.size());
  std::size_t method = 0, last_iter = 0;
  const ExperimentResult r = run_experiment_in_memory(cfg, [&](std::uint64_t, std::size_t iter, std::span<const double> x) {
    if (iter < last_iter) ++method;
    last_iter = iter;
    traj[method].push_back({x[0], x[1]});
  });
  write_experiment(cfg, r);

  std::ofstream plot(out / "motivating" / "trajectories.csv", std::ios::binary);
  plot << "method,iter,x1,x2\n";
  for (std::size_t m = 0; m < traj.size(); ++m) {
    plot << cfg.methods[m].label << ",0,0.5,0.5\n";
    for (std::size_t k = 0; k < traj[m].size(); ++k) {
      plot << cfg.methods[m].label << ',' << k + 1 << ',' << format_g(traj[m][k][0]) << ','
           << format_g(traj[m][k][1]) << '\n';
    }
  }

  auto final_x = [&](std::size_t m) { return r.methods[m].seeds[0].x; };
  const auto xs = final_x(0);
  const double eg = MotivatingProblem::expected_constraint(xs[0], xs[1]);
  const double dist = MotivatingProblem::center_distance(xs[0], xs[1]);
  const double lo = std::sqrt(0.99) - 0.05, hi = std::sqrt(0.99) + 0.05;
  const auto x0 = final_x(1);
  const double eg0 = MotivatingProblem::expected_constraint(x0[0], x0[1]);
  const auto x1 = final_x(2), x25 = final_x(3);
  const bool ok = eg <= 1e-2 && dist >= lo && dist <= hi && eg0 >= 0.5;
  return {ok, fmt("SPBM x=(%.4f, %.4f) E[g]=%.2e dist=%.4f in [%.4f, %.4f]; rho=0 x=(%.3f, %.3f) "
                  "E[g]=%.3f (>= 0.5); rho=1 E[g]=%.3f, rho=2.5 E[g]=%.3f; plot data %s",
                  xs[0], xs[1], eg, dist, lo, hi, x0[0], x0[1], eg0,
                  MotivatingProblem::expected_constraint(x1[0], x1[1]),
                  MotivatingProblem::expected_constraint(x25[0], x25[1]),
                  (out / "motivating" / "trajectories.csv").c_str())};
}

// ---------------------------------------------------------------------------
// 5. Fairness

struct FinalTest {
  double loss = 0.0;
  double max_gap = 0.0;  // max over constraints of |rate_a - rate_b|
};

std::vector<FinalTest> final_test(const MethodResult& m, double threshold) {
  std::vector<FinalTest> out;
  for (const auto& s : m.seeds) {
    double mx = 0.0;
    for (double g : s.test_constraints) mx = std::max(mx, g + threshold);
    out.push_back({s.rows.back().test_loss, mx});
  }
  return out;
}

Outcome fairness(const fs::path& out) {
  const json problem = {{"name", "fairness-pairwise"},
                        {"statistic", "positive-rate"},
                        {"eps_tol", 0.05},
                        {"data", {{"source", "synthetic"}, {"n", 4000}, {"seed", 0}}}};
  const std::string cache = (out / "cache").string();

  json adam = {{"name", "fairness_adam"}, {"problem", problem}, {"methods", {"adam"}},
               {"seeds", {0, 1, 2}},      {"epochs", 30},       {"cache_dir", cache}};
  const ExperimentConfig acfg = resolve_config(adam, Overrides{.out = (out / "fairness" / "adam").string()});
  const ExperimentResult ares = run_experiment(acfg);

  json grid = {{"name", "fairness_spbm_grid"},
               {"problem", problem},
               {"method", "spbm"},
               {"seeds", {0, 1, 2}},
               {"epochs", 30},
               {"cache_dir", cache},
               {"grid", {{"method.alpha", {5e-4, 1e-3}}, {"method.gamma", {0.9, 0.99}}}}};
  const ExperimentConfig gcfg = resolve_config(grid, Overrides{.out = (out / "fairness" / "spbm_grid").string()});
  const GridResult g = grid_search(gcfg);
  const std::size_t k = g.selection.index;
  const ExperimentResult sres = run_experiment_in_memory(
      resolve_config(g.best_config, Overrides{.out = (out / "fairness" / "selected").string()}));

  const double eps = ares.threshold;
  const auto a = final_test(ares.methods[0], eps), s = final_test(sres.methods[0], eps);
  std::vector<double> al, ag, sl, sg;
  for (const auto& t : a) al.push_back(t.loss), ag.push_back(t.max_gap);
  for (const auto& t : s) sl.push_back(t.loss), sg.push_back(t.max_gap);
  const double limit = eps * 1.1;
  const double dloss = mean_of(sl) - mean_of(al);
  const bool ok = mean_of(sg) <= limit && mean_of(ag) >= 0.10 && dloss <= 0.15;
  return {ok, fmt("SPBM (grid point %zu %s, %s rule) gap %s (<= %.3f), loss %s; Adam gap %s (>= 0.10), "
                  "loss %s; loss difference %.4f (<= 0.15)",
                  k, g.outcomes[k].params.dump().c_str(), g.selection.fallback ? "fallback" : "feasible",
                  format_pm(mean_of(sg), sample_std(sg), 4).c_str(), limit,
                  format_pm(mean_of(sl), sample_std(sl), 4).c_str(),
                  format_pm(mean_of(ag), sample_std(ag), 4).c_str(),
                  format_pm(mean_of(al), sample_std(al), 4).c_str(), dloss)};
}

// ---------------------------------------------------------------------------
// 6. Helmholtz

Outcome helmholtz(const fs::path& out) {
  json c = {{"name", "helmholtz"},
            {"problem",
             {{"name", "helmholtz"}, {"hidden", {32, 32, 32, 32}}, {"interior_batch", 256}, {"boundary_batch", 64}}},
            {"methods",
             {{{"name", "spbm"}, {"alpha", 3e-3}, {"gamma", 0.99}, {"mu", 0.0}, {"barrier", "ql"},
               {"schedule", {{"type", "adaptive"}, {"k", 0.99}}}},
              {{"name", "penalized"}, {"rho", 5.0}, {"form", "linear"}, {"lr", 5e-3}}}},
            {"seeds", {0, 1, 2}},
            {"iterations", 2000},
            {"eval_every", 100},
            {"threads", 3}};
  const ExperimentConfig cfg = resolve_config(c, Overrides{.out = (out / "helmholtz").string()});
  const ExperimentResult r = run_experiment(cfg);
  const double eps = r.threshold;
  auto stats = [&](const MethodResult& m) {
    std::vector<double> l2, bc;
    for (const auto& s : m.seeds) {
      l2.push_back(*s.relative_l2);
      bc.push_back(s.test_constraints.at(0) + eps);  // mean u^2 on the boundary
    }
    return std::pair{l2, bc};
  };
  const auto [sl2, sbc] = stats(r.methods[0]);
  const auto [pl2, pbc] = stats(r.methods[1]);
  const bool ok = mean_of(sbc) <= 1e-2 && mean_of(sl2) <= 0.5 && mean_of(sbc) <= mean_of(pbc);
  std::string per_seed;
  for (std::size_t i = 0; i < sl2.size(); ++i) per_seed += fmt(" %.3f", sl2[i]);
  return {ok, fmt("SPBM boundary mean u^2 %s (<= 1e-2), relative L2 %s (<= 0.5; seeds:%s); penalized "
                  "boundary %s, relative L2 %s",
                  format_pm(mean_of(sbc), sample_std(sbc), 4).c_str(),
                  format_pm(mean_of(sl2), sample_std(sl2), 3).c_str(), per_seed.c_str(),
                  format_pm(mean_of(pbc), sample_std(pbc), 4).c_str(),
                  format_pm(mean_of(pl2), sample_std(pl2), 3).c_str())};
}

// ---------------------------------------------------------------------------
// 7. Runtime scaling

Outcome runtime_scaling(const fs::path& out) {
  BenchOptions o;
  o.iterations = 100;
  o.warmup = 10;
  const std::vector<std::size_t> ms{10, 100, 1000};
  const auto rows = bench_runtime({"adam", "spbm"}, ms, o);
  std::vector<double> xm, ys;
  double adam100 = 0, spbm100 = 0;
  std::ofstream csv(out / "runtime_scaling.csv", std::ios::binary);
  csv << "method,m,median_s,min_s\n";
  for (const auto& r : rows) {
    csv << r.method << ',' << r.m << ',' << format_g(r.median_s) << ',' << format_g(r.min_s) << '\n';
    if (r.method == "spbm") {
      xm.push_back(static_cast<double>(r.m));
      ys.push_back(r.median_s);
      if (r.m == 100) spbm100 = r.median_s;
    } else if (r.m == 100) {
      adam100 = r.median_s;
    }
  }
  const AffineFit f = fit_affine(xm, ys);
  const double ratio = spbm100 / adam100;
  return {f.r2 >= 0.9 && ratio <= 5.0,
          fmt("SPBM median step %.3g / %.3g / %.3g ms at m=10/100/1000; affine R^2 %.4f (>= 0.9); "
              "SPBM/Adam at m=100 %.2f (<= 5)",
              ys[0] * 1e3, ys[1] * 1e3, ys[2] * 1e3, f.r2, ratio)};
}

// ---------------------------------------------------------------------------
// 8. Determinism

Outcome determinism(const fs::path& out) {
  const std::vector<json> configs{
      {{"name", "det_fairness"},
       {"problem", {{"name", "fairness-pairwise"}, {"statistic", "positive-rate"}, {"eps_tol", 0.05}}},
       {"methods", {"adam", "spbm", "salm", "penalized"}},
       {"seeds", {0, 1}},
       {"epochs", 2}},
      {{"name", "det_weight_norm"}, {"problem", "weight-norm-mlp"}, {"methods", {"spbm"}}, {"seeds", {4}}, {"epochs", 1}},
      {{"name", "det_helmholtz"}, {"problem", "helmholtz"}, {"methods", {"spbm", "salm"}}, {"seeds", {1}},
       {"iterations", 15}, {"eval_every", 5}},
      {{"name", "det_burgers"}, {"problem", "burgers"}, {"methods", {"spbm"}}, {"seeds", {2}},
       {"iterations", 15}, {"eval_every", 5}},
      {{"name", "det_synthetic"}, {"problem", "synthetic-pairwise"}, {"methods", {"spbm", "adam"}},
       {"seeds", {0, 1}}, {"iterations", 50}, {"eval_every", 10}},
  };
  std::size_t files = 0;
  for (const json& c : configs) {
    const std::string name = c["name"];
    for (const char* rep : {"a", "b"}) {
      json cc = c;
      // Separate caches so the second run regenerates its data.
      cc["cache_dir"] = (out / "determinism" / name / rep / ".cache").string();
      const ExperimentConfig cfg = resolve_config(cc, Overrides{.out = (out / "determinism" / name / rep).string(),
                                                                .threads = std::string(rep) == "b" ? 2u : 1u});
      run_experiment(cfg);
    }
    const fs::path a = out / "determinism" / name / "a";
    for (const auto& e : fs::recursive_directory_iterator(a)) {
      if (e.path().extension() != ".csv" || e.path().filename().string().rfind("seed_", 0) != 0) continue;
      const fs::path rel = fs::relative(e.path(), a);
      const std::string x = slurp(e.path()), y = slurp(out / "determinism" / name / "b" / rel);
      if (x.empty() || x != y) return {false, fmt("%s/%s differs between reruns", name.c_str(), rel.c_str())};
      ++files;
    }
  }
  return {files > 0, fmt("%zu metrics CSVs from %zu configs byte-identical on rerun (1 vs 2 threads)", files,
                         configs.size())};
}

// ---------------------------------------------------------------------------
// 9. Schedule and dual properties

Outcome schedule_properties() {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const problems::SyntheticPairwiseProblem synth10({.num_constraints = 10});
  const problems::SyntheticPairwiseProblem synth30({.num_constraints = 30});
  std::size_t steps = 0;
  double pmin = 1e300, pmax = -1e300, lmin = 1e300;
  auto run = [&](const auto& prob, std::vector<double> x0, std::size_t n_steps) -> std::string {
    const SpbmConfig cfg{.alpha = 1e-3 + 9e-3 * u(rng), .gamma = 0.5 + 0.49 * u(rng), .mu = u(rng),
                         .barrier = u(rng) < 0.5 ? BarrierKind::kQuadraticLog : BarrierKind::kQuadraticReciprocal,
                         .schedule = AdaptiveSchedule{.k_adapt = 0.1 + 0.899 * u(rng)}};
    SpbmState st = SpbmState::init(std::move(x0), prob.num_constraints(), cfg);
    auto sampler = prob.make_sampler(static_cast<std::uint64_t>(rng()));
    for (std::size_t k = 0; k < n_steps; ++k, ++steps) {
      st = spbm_step(std::move(st), cfg, prob, sampler.next());
      for (double p : st.p) {
        pmin = std::min(pmin, p);
        pmax = std::max(pmax, p);
        if (!(p >= 0.1 && p <= 1.0)) return fmt("penalty %.17g outside [0.1, 1] at step %zu", p, k);
      }
      for (double l : st.lambda) {
        lmin = std::min(lmin, l);
        if (!(l > 0.0)) return fmt("dual %.17g not positive at step %zu", l, k);
      }
    }
    return {};
  };
  for (int r = 0; r < 8; ++r) {
    const auto& prob = r % 2 == 0 ? synth10 : synth30;
    if (auto e = run(prob, prob.initial_point(static_cast<std::uint64_t>(r)), 125); !e.empty()) return {false, e};
  }

  // Direction of the adaptive rule before clipping.
  std::uniform_real_distribution<double> gd(-20.0, 20.0), pd(0.1, 1.0), kd(0.01, 0.99);
  std::size_t dir_checks = 0;
  for (int i = 0; i < 20000; ++i) {
    const AdaptiveSchedule a{.k_adapt = kd(rng), .clip_lo = 1e-300, .clip_hi = 1e300};
    const std::vector<double> g{gd(rng)}, p{pd(rng)};
    if (g[0] == 0.0) continue;
    for (BarrierKind k : {BarrierKind::kQuadraticLog, BarrierKind::kQuadraticReciprocal}) {
      const double np = update_penalty(a, k, g, p, 0)[0];
      if (g[0] > 0.0 ? np > p[0] : np < p[0]) {
        return {false, fmt("direction wrong: g=%.6g p=%.6g -> %.6g", g[0], p[0], np)};
      }
      ++dir_checks;
    }
  }
  return {true, fmt("%zu SPBM steps: p in [%.3f, %.3f], min lambda %.3e; %zu direction checks", steps, pmin,
                    pmax, lmin, dir_checks)};
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Acceptance criteria"};
  std::string out = "acceptance_out";
  std::set<int> only;
  app.add_option("--out", out, "Directory for run outputs and plot data");
  app.add_option("--only", only, "Run only these criteria (1-9)")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(out);

  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const fs::path dir(out);
  const std::vector<Criterion> criteria{
      {1, "barrier exactness", 1, barrier_exactness},
      {2, "gradient correctness", 30, gradient_correctness},
      {3, "reduction to Adam", 1, reduction},
      {4, "motivating example", 10, [&] { return motivating(dir); }},
      {5, "fairness desk-scale", 60, [&] { return fairness(dir); }},
      {6, "Helmholtz desk-scale", 300, [&] { return helmholtz(dir); }},
      {7, "runtime scaling", 120, [&] { return runtime_scaling(dir); }},
      {8, "determinism", 30, [&] { return determinism(dir); }},
      {9, "schedule and dual properties", 10, schedule_properties},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.contains(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = dt < c.budget_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s %d %s (%.2f s, budget %.0f s%s): %s\n", pass ? "PASS" : "FAIL", c.id, c.name, dt,
                c.budget_s, in_time ? "" : ", over budget", o.detail.c_str());
    std::fflush(stdout);
  }
  return std::min(failed, 255);
}
