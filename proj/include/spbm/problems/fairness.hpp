#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "spbm/errors.hpp"
#include "spbm/tape.hpp"

namespace spbm::problems {

/// Per-group batch means of a B x 1 statistic, as 1x1 tape nodes. Each mean
/// is a product with a constant averaging row, so it stays differentiable.
inline std::vector<ad::Var> group_means(ad::Var stat, std::span<const std::size_t> group_labels,
                                        std::size_t num_groups,
                                        std::span<const std::string> group_names = {}) {
  const std::size_t b = group_labels.size();
  if (stat.cols() != 1 || stat.rows() != b) {
    throw ShapeError("group_means: statistic " + stat.value().shape_string() + " vs " +
                     std::to_string(b) + " group labels");
  }
  std::vector<double> counts(num_groups, 0.0);
  for (std::size_t g : group_labels) {
    if (g >= num_groups) throw ShapeError("group_means: group id " + std::to_string(g) + " out of range");
    counts[g] += 1.0;
  }
  ad::Tape& tape = *stat.tape();
  std::vector<ad::Var> means;
  means.reserve(num_groups);
  for (std::size_t g = 0; g < num_groups; ++g) {
    if (counts[g] == 0.0) {
      const std::string name = g < group_names.size() ? group_names[g] : std::to_string(g);
      throw ConfigError("fairness constraint: group '" + name + "' is missing from the batch");
    }
    Matrix w(1, b, 0.0);
    for (std::size_t i = 0; i < b; ++i) {
      if (group_labels[i] == g) w.data[i] = 1.0 / counts[g];
    }
    means.push_back(matmul(tape.constant(std::move(w)), stat));
  }
  return means;
}

/// sum_R |mean_R(stat) - mean(stat)| - eps_tol, a single constraint.
inline ad::Var fairness_l1_constraint(ad::Var stat, std::span<const std::size_t> group_labels,
                                      std::size_t num_groups, double eps_tol,
                                      std::span<const std::string> group_names = {}) {
  const auto means = group_means(stat, group_labels, num_groups, group_names);
  const ad::Var overall = mean(stat);
  ad::Var acc = abs(means[0] - overall);
  for (std::size_t g = 1; g < means.size(); ++g) acc = acc + abs(means[g] - overall);
  return acc - eps_tol;
}

/// Ordered pairs (i, j), i != j, in row-major order over groups.
inline std::vector<std::pair<std::size_t, std::size_t>> ordered_pairs(std::size_t num_groups) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < num_groups; ++i) {
    for (std::size_t j = 0; j < num_groups; ++j) {
      if (i != j) out.emplace_back(i, j);
    }
  }
  return out;
}

/// |mean_Ri - mean_Rj| - eps_tol for every ordered pair i != j, giving
/// |R| * (|R| - 1) constraints. `limit` truncates the list when nonzero.
inline std::vector<ad::Var> pairwise_constraints(ad::Var stat,
                                                 std::span<const std::size_t> group_labels,
                                                 std::size_t num_groups, double eps_tol,
                                                 std::span<const std::string> group_names = {},
                                                 std::size_t limit = 0) {
  const auto means = group_means(stat, group_labels, num_groups, group_names);
  auto pairs = ordered_pairs(num_groups);
  if (limit != 0 && limit < pairs.size()) pairs.resize(limit);
  std::vector<ad::Var> out;
  out.reserve(pairs.size());
  for (auto [i, j] : pairs) out.push_back(abs(means[i] - means[j]) - eps_tol);
  return out;
}

/// ||W_l||_F - 2 for every weight matrix.
inline std::vector<ad::Var> weight_norm_constraints(std::span<const ad::Var> weights,
                                                    double radius = 2.0) {
  std::vector<ad::Var> out;
  out.reserve(weights.size());
  for (ad::Var w : weights) out.push_back(frobenius_norm(w) - radius);
  return out;
}

}  // namespace spbm::problems
