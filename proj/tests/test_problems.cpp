#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "spbm/data.hpp"
#include "spbm/problems/classification.hpp"
#include "spbm/problems/fairness.hpp"
#include "spbm/problems/mlp.hpp"
#include "spbm/problems/motivating.hpp"
#include "spbm/problems/pde.hpp"
#include "spbm/problems/synthetic.hpp"

namespace {

using spbm::Matrix;
using spbm::ad::Tape;
using spbm::ad::Var;
using namespace spbm::problems;

spbm::Evaluation eval_motivating(double x1, double x2) {
  const MotivatingProblem prob;
  return spbm::evaluate(prob, std::vector<double>{x1, x2}, MotivatingProblem::full_batch());
}

TEST(Motivating, ReferencePoints) {
  auto origin = eval_motivating(0.0, 0.0);
  EXPECT_EQ(origin.objective, 0.0);
  EXPECT_NEAR(origin.constraints[0], 2.61, 1e-14);

  auto center = eval_motivating(2.0, 0.0);
  EXPECT_EQ(center.objective, 4.0);
  EXPECT_NEAR(center.constraints[0], -0.99, 1e-14);

  auto edge = eval_motivating(2.0 + std::sqrt(0.99), 0.0);
  EXPECT_NEAR(edge.constraints[0], 0.0, 1e-14);
}

TEST(Motivating, MatchesNearestCenterFormula) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  int checked = 0;
  while (checked < 100) {
    const double x1 = u(rng), x2 = u(rng);
    if (std::abs(x1) <= 0.2) continue;
    const double c = x1 > 0 ? 2.0 : -2.0;
    const double d2 = (x1 - c) * (x1 - c) + x2 * x2;
    const double g = eval_motivating(x1, x2).constraints[0];
    ASSERT_NEAR(g, d2 + 0.01 - 1.0, 1e-12);
    ASSERT_NEAR(g, MotivatingProblem::expected_constraint(x1, x2), 1e-12);
    ASSERT_EQ(g <= 0.0, MotivatingProblem::center_distance(x1, x2) <= std::sqrt(0.99) + 1e-15);
    ++checked;
  }
}

TEST(Motivating, SamplerDrawsTwoPointLaw) {
  const MotivatingProblem prob(MotivatingProblem::Options{.batch_size = 1000, .full_batch = false});
  auto s = prob.make_sampler(1);
  const auto b = s.next();
  ASSERT_EQ(b.size(), 1000u);
  const auto plus = std::count(b.begin(), b.end(), 0.1);
  EXPECT_EQ(plus + std::count(b.begin(), b.end(), -0.1), 1000);
  EXPECT_NEAR(static_cast<double>(plus) / 1000.0, 0.5, 0.06);
  EXPECT_THROW(MotivatingProblem(MotivatingProblem::Options{.x0 = {1.0}}), spbm::ConfigError);
}

std::vector<double> weight_norm_values(const Matrix& w) {
  Tape t;
  Var wv = t.parameter(w);
  std::vector<double> out;
  for (Var g : weight_norm_constraints(std::vector<Var>{wv})) out.push_back(g.item());
  return out;
}

TEST(WeightNorm, Examples) {
  EXPECT_EQ(weight_norm_values(Matrix(3, 2, 0.0))[0], -2.0);
  EXPECT_NEAR(weight_norm_values(Matrix::from_rows({{1, 0}, {0, 1}}))[0], std::sqrt(2.0) - 2.0, 1e-15);
  EXPECT_NEAR(weight_norm_values(Matrix(2, 2, 1.0))[0], 0.0, 1e-15);
}

TEST(WeightNorm, GradientMatchesFiniteDifference) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd;
  std::vector<double> x(12);
  for (double& v : x) v = nd(rng);
  auto build = [](Tape& t, std::span<const double> p) {
    Var w = t.parameter(Matrix(3, 4, std::vector<double>(p.begin(), p.end())));
    return weight_norm_constraints(std::vector<Var>{w})[0];
  };
  EXPECT_LE(spbm::ad::finite_difference_check(build, x, 1e-6), 1e-5);
}

struct GroupedStat {
  Tape tape;
  Var stat;
  std::vector<std::size_t> groups;
};

// Stat values per sample and their group labels.
void make_stat(GroupedStat& gs, const std::vector<double>& values,
               const std::vector<std::size_t>& groups) {
  gs.stat = gs.tape.parameter(Matrix::column(values));
  gs.groups = groups;
}

TEST(FairnessL1, Examples) {
  {
    GroupedStat gs;
    make_stat(gs, {0.3, 0.3, 0.5, 0.5}, {0, 0, 1, 1});
    EXPECT_NEAR(fairness_l1_constraint(gs.stat, gs.groups, 2, 0.05).item(), 0.15, 1e-15);
  }
  {
    GroupedStat gs;
    make_stat(gs, {0.2, 0.7, 0.7, 0.2}, {0, 0, 1, 1});
    EXPECT_NEAR(fairness_l1_constraint(gs.stat, gs.groups, 2, 0.05).item(), -0.05, 1e-15);
  }
  {
    GroupedStat gs;
    make_stat(gs, {0.1, 0.9, 0.4}, {0, 0, 0});
    EXPECT_NEAR(fairness_l1_constraint(gs.stat, gs.groups, 1, 0.05).item(), -0.05, 1e-15);
  }
}

TEST(FairnessL1, MissingGroupIsNamed) {
  GroupedStat gs;
  make_stat(gs, {0.3, 0.5}, {0, 0});
  const std::vector<std::string> names{"A", "B"};
  try {
    fairness_l1_constraint(gs.stat, gs.groups, 2, 0.05, names);
    FAIL() << "expected ConfigError";
  } catch (const spbm::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("'B'"), std::string::npos);
  }
}

TEST(Pairwise, Examples) {
  GroupedStat gs;
  make_stat(gs, {0.3, 0.3, 0.5, 0.5}, {0, 0, 1, 1});
  auto cs = pairwise_constraints(gs.stat, gs.groups, 2, 0.1);
  ASSERT_EQ(cs.size(), 2u);
  EXPECT_NEAR(cs[0].item(), 0.1, 1e-15);
  EXPECT_NEAR(cs[1].item(), 0.1, 1e-15);

  GroupedStat eq;
  make_stat(eq, {0.4, 0.4, 0.4}, {0, 1, 2});
  auto ce = pairwise_constraints(eq.stat, eq.groups, 3, 0.1);
  ASSERT_EQ(ce.size(), 6u);
  for (Var c : ce) EXPECT_NEAR(c.item(), -0.1, 1e-15);
  EXPECT_EQ(ordered_pairs(18).size(), 306u);
}

TEST(Pairwise, InvariantUnderGroupRelabeling) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t G = 4;
    std::vector<double> vals(24);
    std::vector<std::size_t> groups(24);
    for (std::size_t i = 0; i < 24; ++i) {
      vals[i] = u(rng);
      groups[i] = i % G;
    }
    std::vector<std::size_t> perm{0, 1, 2, 3};
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::size_t> relabeled(24);
    for (std::size_t i = 0; i < 24; ++i) relabeled[i] = perm[groups[i]];

    GroupedStat a, b;
    make_stat(a, vals, groups);
    make_stat(b, vals, relabeled);
    std::vector<double> va, vb;
    for (Var c : pairwise_constraints(a.stat, a.groups, G, 0.05)) va.push_back(c.item());
    for (Var c : pairwise_constraints(b.stat, b.groups, G, 0.05)) vb.push_back(c.item());
    std::sort(va.begin(), va.end());
    std::sort(vb.begin(), vb.end());
    for (std::size_t i = 0; i < va.size(); ++i) ASSERT_NEAR(va[i], vb[i], 1e-15);
  }
}

TEST(Mlp, ForwardExamples) {
  MlpSpec spec{{3, 4, 1}, Activation::kTanh};
  std::vector<double> zeros(spec.num_params(), 0.0);
  Tape t;
  auto params = register_mlp(t, spec, zeros);
  Var logits = mlp_forward(spec, params, t.constant(Matrix::from_rows({{1, 2, 3}, {-4, 5, 0}})));
  for (double p : positive_rate(logits).value().data) EXPECT_EQ(p, 0.5);

  MlpSpec lin{{1, 1}, Activation::kTanh};
  Tape t2;
  auto lp = register_mlp(t2, lin, std::vector<double>{1.0, 0.0});
  EXPECT_EQ(mlp_forward(lin, lp, t2.constant(3.0)).item(), 3.0);

  EXPECT_THROW(mlp_forward(spec, params, t.constant(Matrix(2, 2))), spbm::ShapeError);
  EXPECT_THROW(register_mlp(t, spec, std::vector<double>(3)), spbm::ShapeError);
}

TEST(Mlp, LossExamples) {
  Tape t;
  Var z = t.constant(Matrix::column(std::vector<double>{0.0, 0.0}));
  auto bce = binary_cross_entropy(z, std::vector<double>{1.0, 0.0});
  EXPECT_NEAR(bce.value().data[0], std::log(2.0), 1e-15);
  EXPECT_NEAR(bce.value().data[1], 0.69315, 1e-5);

  // Stable for large logits.
  Var big = t.constant(Matrix::column(std::vector<double>{800.0, -800.0}));
  auto bb = binary_cross_entropy(big, std::vector<double>{0.0, 1.0});
  EXPECT_NEAR(bb.value().data[0], 800.0, 1e-9);
  EXPECT_NEAR(bb.value().data[1], 800.0, 1e-9);

  Var mz = t.constant(Matrix::from_rows({{1.0, 2.0, 3.0}}));
  auto mce = multiclass_cross_entropy(mz, std::vector<double>{2.0});
  const double lse = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0));
  EXPECT_NEAR(mce.item(), lse - 3.0, 1e-14);

  Var acc_logit = t.constant(Matrix::column(std::vector<double>{0.0}));
  EXPECT_NEAR(soft_accuracy(acc_logit, std::vector<double>{1.0}).item(), 0.5, 1e-15);
}

TEST(Mlp, LossGradientsMatchFiniteDifference) {
  MlpSpec spec{{3, 5, 3}, Activation::kTanh};
  auto x = spec.init(4);
  Matrix in = Matrix::from_rows({{0.1, -0.3, 0.8}, {1.2, 0.4, -0.5}, {-0.7, 0.9, 0.2}, {0.0, 0.3, 0.3}});
  std::vector<double> labels{0, 2, 1, 2};
  auto build = [&](Tape& t, std::span<const double> p) {
    auto params = register_mlp(t, spec, p);
    return mean(multiclass_cross_entropy(mlp_forward(spec, params, t.constant(in)), labels));
  };
  EXPECT_LE(spbm::ad::finite_difference_check(build, x, 1e-5), 1e-4);
}

TEST(Helmholtz, AnalyticResidualIsSmall) {
  std::mt19937_64 rng(5);
  const Matrix pts = spbm::problems::detail::box_points(100, -1, 1, -1, 1, rng);
  Tape t;
  auto u = [&](const Matrix& p) {
    Matrix v(p.rows, 1);
    for (std::size_t i = 0; i < p.rows; ++i) v.data[i] = HelmholtzProblem::exact(p(i, 0), p(i, 1));
    return t.constant(std::move(v));
  };
  // Max over points of the squared residual, one point at a time.
  double worst = 0.0;
  for (std::size_t i = 0; i < pts.rows; ++i) {
    Matrix one(1, 2);
    one(0, 0) = pts(i, 0);
    one(0, 1) = pts(i, 1);
    worst = std::max(worst, std::sqrt(HelmholtzProblem::residual_loss(t, u, one, 1e-3).item()));
  }
  EXPECT_LE(worst, 1e-2);

  Matrix b = HelmholtzProblem::boundary_points(64, rng);
  for (std::size_t i = 0; i < b.rows; ++i) {
    EXPECT_NEAR(HelmholtzProblem::exact(b(i, 0), b(i, 1)), 0.0, 1e-14);
    EXPECT_TRUE(std::abs(b(i, 0)) == 1.0 || std::abs(b(i, 1)) == 1.0);
  }
}

TEST(Helmholtz, ZeroNetwork) {
  const PdeSpec spec{};
  const HelmholtzProblem prob(spec, MlpSpec{{2, 8, 8, 1}, Activation::kTanh});
  std::vector<double> zeros(prob.dim(), 0.0);
  auto sampler = prob.make_sampler(2);
  const auto batch = sampler.next();
  auto e = spbm::evaluate(prob, zeros, batch);
  double q2 = 0.0;
  for (std::size_t i = 0; i < batch.interior.rows; ++i) {
    const double q = HelmholtzProblem::source(batch.interior(i, 0), batch.interior(i, 1));
    q2 += q * q;
  }
  EXPECT_NEAR(e.objective, q2 / static_cast<double>(batch.interior.rows), 1e-9 * q2);
  ASSERT_EQ(e.constraints.size(), 1u);
  EXPECT_EQ(e.constraints[0], -1e-4);
  EXPECT_NEAR(prob.relative_l2_error(zeros), 1.0, 1e-15);
}

TEST(Helmholtz, StepSizeGuard) {
  EXPECT_THROW(HelmholtzProblem(PdeSpec{.fd_step = 1e-7}, MlpSpec{{2, 4, 1}}), spbm::ConfigError);
  EXPECT_THROW(HelmholtzProblem(PdeSpec{}, MlpSpec{{3, 4, 1}}), spbm::ConfigError);
}

TEST(Helmholtz, GradientMatchesFiniteDifference) {
  const HelmholtzProblem prob(PdeSpec{.fd_step = 1e-2, .interior_batch = 8, .boundary_batch = 4},
                              MlpSpec{{2, 4, 1}, Activation::kTanh});
  auto sampler = prob.make_sampler(1);
  const auto batch = sampler.next();
  auto x = prob.initial_point(3);
  auto build = [&](Tape& t, std::span<const double> p) {
    auto r = prob.record(t, p, batch);
    return r.objective + r.constraints[0] * 3.0;
  };
  EXPECT_LE(spbm::ad::finite_difference_check(build, x, 1e-5), 1e-4);
}

TEST(Burgers, ZeroNetwork) {
  const BurgersProblem prob(PdeSpec{}, MlpSpec{{2, 6, 1}, Activation::kTanh});
  EXPECT_NEAR(BurgersProblem::kViscosity, 0.0031831, 1e-7);
  EXPECT_EQ(prob.num_constraints(), 2u);
  std::vector<double> zeros(prob.dim(), 0.0);
  auto sampler = prob.make_sampler(4);
  const auto batch = sampler.next();
  auto e = spbm::evaluate(prob, zeros, batch);
  EXPECT_EQ(e.objective, 0.0);
  ASSERT_EQ(e.constraints.size(), 2u);
  double s2 = 0.0;
  for (std::size_t i = 0; i < batch.initial.rows; ++i) {
    EXPECT_EQ(batch.initial(i, 0), 0.0);
    const double s = std::sin(std::numbers::pi * batch.initial(i, 1));
    s2 += s * s;
  }
  EXPECT_NEAR(e.constraints[0], s2 / static_cast<double>(batch.initial.rows) - 1e-4, 1e-14);
  EXPECT_EQ(e.constraints[1], -1e-4);
  for (std::size_t i = 0; i < batch.boundary.rows; ++i) {
    EXPECT_EQ(std::abs(batch.boundary(i, 1)), 1.0);
  }
}

TEST(Burgers, ResidualOfKnownField) {
  // u = -sin(pi z) exp(-t): u_t + u u_z - c u_zz at a point, by hand.
  Tape t;
  auto u = [&](const Matrix& p) {
    Matrix v(p.rows, 1);
    for (std::size_t i = 0; i < p.rows; ++i) {
      v.data[i] = -std::sin(std::numbers::pi * p(i, 1)) * std::exp(-p(i, 0));
    }
    return t.constant(std::move(v));
  };
  const double tt = 0.3, z = 0.4, pi = std::numbers::pi;
  const double val = -std::sin(pi * z) * std::exp(-tt);
  const double ut = -val;
  const double uz = -pi * std::cos(pi * z) * std::exp(-tt);
  const double uzz = pi * pi * std::sin(pi * z) * std::exp(-tt);
  const double r = ut + val * uz - BurgersProblem::kViscosity * uzz;
  Matrix pt(1, 2);
  pt(0, 0) = tt;
  pt(0, 1) = z;
  EXPECT_NEAR(std::sqrt(BurgersProblem::residual_loss(u, pt, 1e-3).item()), std::abs(r), 1e-5);
}

spbm::data::Dataset small_dataset(std::size_t n, std::size_t groups, std::uint64_t seed) {
  spbm::data::CensusRecipe recipe;
  recipe.groups.clear();
  for (std::size_t g = 0; g < groups; ++g) {
    recipe.groups.push_back({"g" + std::to_string(g), 1.0 / static_cast<double>(groups),
                             0.3 * (static_cast<double>(g) - 0.5)});
  }
  return spbm::data::synth_census(seed, n, recipe);
}

TEST(Classification, ConstraintCountsMatchDeclaredM) {
  auto ds = small_dataset(200, 3, 1);
  for (auto family : {ConstraintFamily::kWeightNorm, ConstraintFamily::kFairnessL1,
                      ConstraintFamily::kFairnessPairwise}) {
    for (auto stat : {GroupStatistic::kLoss, GroupStatistic::kPositiveRate, GroupStatistic::kAccuracy}) {
      ClassificationProblem prob(ds, {.hidden = {8, 4}, .family = family, .statistic = stat,
                                      .batch_size = 30});
      auto sampler = prob.make_sampler(2);
      Tape t;
      auto rec = prob.record(t, prob.initial_point(1), sampler.next());
      EXPECT_EQ(rec.constraints.size(), prob.num_constraints());
    }
  }
  ClassificationProblem wn(ds, {.family = ConstraintFamily::kWeightNorm, .batch_size = 30});
  EXPECT_EQ(wn.num_constraints(), 3u);
  EXPECT_THROW(ClassificationProblem(ds, {.batch_size = 31}), spbm::ConfigError);
  EXPECT_EQ(wn.iterations_per_epoch(), 4u);  // ceil(120 / 30)
}

TEST(Classification, GradientsMatchFiniteDifference) {
  auto ds = small_dataset(100, 2, 3);
  for (auto family : {ConstraintFamily::kWeightNorm, ConstraintFamily::kFairnessL1,
                      ConstraintFamily::kFairnessPairwise}) {
    ClassificationProblem prob(ds, {.hidden = {5}, .activation = Activation::kTanh, .family = family,
                                    .statistic = GroupStatistic::kPositiveRate, .batch_size = 20});
    auto sampler = prob.make_sampler(5);
    const auto batch = sampler.next();
    auto build = [&](Tape& t, std::span<const double> p) {
      auto r = prob.record(t, p, batch);
      Var acc = r.objective;
      for (Var c : r.constraints) acc = acc + c * 0.7;
      return acc;
    };
    EXPECT_LE(spbm::ad::finite_difference_check(build, prob.initial_point(6), 1e-5), 1e-4);
  }
}

TEST(Synthetic, ExactlyMConstraints) {
  for (std::size_t m : {10u, 100u, 1000u}) {
    SyntheticPairwiseProblem prob({.num_constraints = m});
    EXPECT_EQ(prob.batch_size() % prob.num_groups(), 0u);
    auto sampler = prob.make_sampler(1);
    Tape t;
    auto rec = prob.record(t, prob.initial_point(0), sampler.next());
    EXPECT_EQ(rec.constraints.size(), m);
  }
  EXPECT_EQ(SyntheticPairwiseProblem::groups_for(10), 4u);
  EXPECT_EQ(SyntheticPairwiseProblem::groups_for(100), 11u);
  EXPECT_EQ(SyntheticPairwiseProblem::groups_for(1000), 33u);
}

}  // namespace
