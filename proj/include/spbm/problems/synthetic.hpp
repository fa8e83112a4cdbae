#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "spbm/data.hpp"
#include "spbm/errors.hpp"
#include "spbm/problem.hpp"
#include "spbm/problems/fairness.hpp"
#include "spbm/problems/mlp.hpp"
#include "spbm/tape.hpp"

namespace spbm::problems {

/// Random binary classification task with exactly m pairwise positive-rate
/// constraints, for runtime scaling measurements. The parameter count does
/// not depend on m; the number of groups is the smallest G with
/// G * (G - 1) >= m.
class SyntheticPairwiseProblem {
 public:
  using Batch = std::vector<std::size_t>;
  using Sampler = data::StratifiedSampler;

  struct Options {
    std::size_t num_constraints = 10;
    std::size_t num_features = 10;
    std::vector<std::size_t> hidden{32};
    /// Rounded up to a multiple of the group count.
    std::size_t batch_size = 132;
    std::size_t rows_per_group = 40;
    double eps_tol = 0.05;
    std::uint64_t data_seed = 7;
  };

  static std::size_t groups_for(std::size_t m) {
    std::size_t g = 1;
    while (g * (g - 1) < m) ++g;
    return g;
  }

  explicit SyntheticPairwiseProblem(Options opts) : opts_(std::move(opts)) {
    groups_ = groups_for(opts_.num_constraints);
    batch_size_ = ((opts_.batch_size + groups_ - 1) / groups_) * groups_;
    const std::size_t n = groups_ * opts_.rows_per_group;
    const std::size_t d = opts_.num_features;
    ds_.features = Matrix(n, d);
    ds_.labels.resize(n);
    ds_.groups.resize(n);
    for (std::size_t g = 0; g < groups_; ++g) ds_.group_names.push_back("g" + std::to_string(g));
    std::mt19937_64 rng(opts_.data_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      ds_.groups[i] = i % groups_;
      for (std::size_t j = 0; j < d; ++j) ds_.features(i, j) = normal(rng);
      ds_.labels[i] = ds_.features(i, 0) + 0.3 * normal(rng) > 0.0 ? 1.0 : 0.0;
    }
    net_.widths.push_back(d);
    for (std::size_t h : opts_.hidden) net_.widths.push_back(h);
    net_.widths.push_back(1);
    net_.activation = Activation::kTanh;
    rows_.resize(n);
    for (std::size_t i = 0; i < n; ++i) rows_[i] = i;
  }

  std::size_t dim() const { return net_.num_params(); }
  std::size_t num_constraints() const { return opts_.num_constraints; }
  std::size_t num_groups() const { return groups_; }
  std::size_t batch_size() const { return batch_size_; }

  Recorded record(ad::Tape& tape, std::span<const double> x, const Batch& batch) const {
    const MlpParams params = register_mlp(tape, net_, x);
    const std::size_t d = ds_.num_features();
    Matrix in(batch.size(), d);
    std::vector<double> labels(batch.size());
    std::vector<std::size_t> groups(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      for (std::size_t j = 0; j < d; ++j) in(i, j) = ds_.features(batch[i], j);
      labels[i] = ds_.labels[batch[i]];
      groups[i] = ds_.groups[batch[i]];
    }
    const ad::Var logits = mlp_forward(net_, params, tape.constant(std::move(in)));
    Recorded out{mean(binary_cross_entropy(logits, labels)), {}};
    if (opts_.num_constraints > 0) {
      out.constraints = pairwise_constraints(positive_rate(logits), groups, groups_, opts_.eps_tol,
                                             ds_.group_names, opts_.num_constraints);
    }
    return out;
  }

  Sampler make_sampler(std::uint64_t seed) const {
    return Sampler::over(ds_, rows_, batch_size_, seed);
  }
  std::vector<double> initial_point(std::uint64_t seed) const { return net_.init(seed); }
  Batch eval_batch(Partition) const { return rows_; }
  std::size_t iterations_per_epoch() const { return 50; }
  double constraint_threshold() const { return opts_.eps_tol; }

 private:
  Options opts_;
  std::size_t groups_ = 1;
  std::size_t batch_size_ = 1;
  data::Dataset ds_;
  MlpSpec net_;
  std::vector<std::size_t> rows_;
};

static_assert(RunnableProblem<SyntheticPairwiseProblem>);

}  // namespace spbm::problems
