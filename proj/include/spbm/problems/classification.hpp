#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spbm/data.hpp"
#include "spbm/errors.hpp"
#include "spbm/problem.hpp"
#include "spbm/problems/fairness.hpp"
#include "spbm/problems/mlp.hpp"
#include "spbm/tape.hpp"

namespace spbm::problems {

enum class ConstraintFamily { kWeightNorm, kFairnessL1, kFairnessPairwise };

/// Group statistic compared across groups by the fairness constraints.
enum class GroupStatistic { kLoss, kPositiveRate, kAccuracy };

inline GroupStatistic parse_statistic(std::string_view s) {
  if (s == "loss") return GroupStatistic::kLoss;
  if (s == "positive-rate" || s == "positive_rate") return GroupStatistic::kPositiveRate;
  if (s == "accuracy") return GroupStatistic::kAccuracy;
  throw ConfigError("unknown group statistic '" + std::string(s) +
                    "' (expected loss|positive-rate|accuracy)");
}

/// MLP classifier on a tabular dataset, with weight-norm or group-fairness
/// constraints. The dataset is split 60/20/20 and standardized on train.
class ClassificationProblem {
 public:
  using Batch = std::vector<std::size_t>;
  using Sampler = data::StratifiedSampler;

  struct Options {
    std::vector<std::size_t> hidden{64, 16};
    Activation activation = Activation::kRelu;
    ConstraintFamily family = ConstraintFamily::kFairnessPairwise;
    GroupStatistic statistic = GroupStatistic::kLoss;
    double eps_tol = 0.1;
    double weight_radius = 4.0;
    std::size_t batch_size = 60;
    std::uint64_t split_seed = 0;
  };

  ClassificationProblem(data::Dataset ds, Options opts) : ds_(std::move(ds)), opts_(std::move(opts)) {
    ds_.validate();
    split_ = data::split_dataset(ds_, opts_.split_seed);
    inputs_ = data::standardize(ds_, split_).features;

    std::set<double> classes(ds_.labels.begin(), ds_.labels.end());
    for (double c : classes) {
      if (c < 0 || c != std::floor(c)) {
        throw ConfigError("classification: labels must be non-negative integers");
      }
    }
    num_classes_ = std::max<std::size_t>(2, static_cast<std::size_t>(*classes.rbegin()) + 1);
    if (num_classes_ > 2 && opts_.statistic != GroupStatistic::kLoss) {
      throw ConfigError("classification: multiclass labels only support the 'loss' statistic");
    }
    net_.widths.push_back(ds_.num_features());
    for (std::size_t h : opts_.hidden) net_.widths.push_back(h);
    net_.widths.push_back(num_classes_ > 2 ? num_classes_ : 1);
    net_.activation = opts_.activation;
    net_.validate();
    if (opts_.batch_size % ds_.num_groups() != 0) {
      throw ConfigError("classification: batch size " + std::to_string(opts_.batch_size) +
                        " is not divisible by the number of groups (" +
                        std::to_string(ds_.num_groups()) + ")");
    }
  }

  std::size_t dim() const { return net_.num_params(); }
  std::size_t num_constraints() const {
    switch (opts_.family) {
      case ConstraintFamily::kWeightNorm: return net_.num_layers();
      case ConstraintFamily::kFairnessL1: return 1;
      case ConstraintFamily::kFairnessPairwise: return ds_.num_groups() * (ds_.num_groups() - 1);
    }
    return 0;
  }

  const MlpSpec& network() const { return net_; }
  const data::Dataset& dataset() const { return ds_; }
  const data::Split& split() const { return split_; }
  const Options& options() const { return opts_; }

  Recorded record(ad::Tape& tape, std::span<const double> x, const Batch& batch) const {
    if (batch.empty()) throw ConfigError("classification: empty batch");
    const MlpParams params = register_mlp(tape, net_, x);
    const std::size_t d = ds_.num_features();
    Matrix in(batch.size(), d);
    std::vector<double> labels(batch.size());
    std::vector<std::size_t> groups(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const std::size_t r = batch[i];
      std::copy_n(inputs_.data.begin() + static_cast<std::ptrdiff_t>(r * d), d,
                  in.data.begin() + static_cast<std::ptrdiff_t>(i * d));
      labels[i] = ds_.labels[r];
      groups[i] = ds_.groups[r];
    }
    const ad::Var logits = mlp_forward(net_, params, tape.constant(std::move(in)));
    const ad::Var losses = num_classes_ > 2 ? multiclass_cross_entropy(logits, labels)
                                            : binary_cross_entropy(logits, labels);
    Recorded out{mean(losses), {}};

    if (opts_.family == ConstraintFamily::kWeightNorm) {
      out.constraints = weight_norm_constraints(params.weights, opts_.weight_radius);
      return out;
    }
    ad::Var stat = losses;
    if (opts_.statistic == GroupStatistic::kPositiveRate) stat = positive_rate(logits);
    if (opts_.statistic == GroupStatistic::kAccuracy) stat = soft_accuracy(logits, labels);
    if (opts_.family == ConstraintFamily::kFairnessL1) {
      out.constraints.push_back(
          fairness_l1_constraint(stat, groups, ds_.num_groups(), opts_.eps_tol, ds_.group_names));
    } else {
      out.constraints =
          pairwise_constraints(stat, groups, ds_.num_groups(), opts_.eps_tol, ds_.group_names);
    }
    return out;
  }

  Sampler make_sampler(std::uint64_t seed) const {
    return Sampler::over(ds_, split_.train, opts_.batch_size, seed);
  }
  std::vector<double> initial_point(std::uint64_t seed) const { return net_.init(seed); }
  Batch eval_batch(Partition part) const {
    switch (part) {
      case Partition::kTrain: return split_.train;
      case Partition::kValidation: return split_.validation;
      case Partition::kTest: return split_.test;
    }
    return split_.test;
  }
  std::size_t iterations_per_epoch() const {
    return (split_.train.size() + opts_.batch_size - 1) / opts_.batch_size;
  }
  double constraint_threshold() const {
    return opts_.family == ConstraintFamily::kWeightNorm ? opts_.weight_radius : opts_.eps_tol;
  }

 private:
  data::Dataset ds_;
  Options opts_;
  data::Split split_;
  Matrix inputs_;
  MlpSpec net_;
  std::size_t num_classes_ = 2;
};

static_assert(RunnableProblem<ClassificationProblem>);

}  // namespace spbm::problems
