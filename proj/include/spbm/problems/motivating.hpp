#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "spbm/errors.hpp"
#include "spbm/problem.hpp"
#include "spbm/tape.hpp"

namespace spbm::problems {

/// Two-disk toy problem:
///   min x1^2 + x2^2  s.t.  E[min(g+, g-)] <= 0,
///   g+-(x, xi) = (x1 +- 2 + xi)^2 + x2^2 - 1,  P(xi = 0.1) = P(xi = -0.1) = 1/2.
/// The feasible set is the two disks of radius sqrt(0.99) around (+-2, 0).
class MotivatingProblem {
 public:
  /// Realizations of xi.
  using Batch = std::vector<double>;

  static constexpr double kNoise = 0.1;

  class Sampler {
   public:
    Sampler(std::size_t batch_size, bool full_batch, std::uint64_t seed)
        : batch_size_(batch_size), full_batch_(full_batch), rng_(seed) {}
    Batch next() {
      if (full_batch_) return MotivatingProblem::full_batch();
      std::bernoulli_distribution coin(0.5);
      Batch b(batch_size_);
      for (double& xi : b) xi = coin(rng_) ? kNoise : -kNoise;
      return b;
    }

   private:
    std::size_t batch_size_;
    bool full_batch_;
    std::mt19937_64 rng_;
  };

  struct Options {
    std::size_t batch_size = 2;
    /// Use both realizations of xi in every batch (exact expectation).
    bool full_batch = true;
    std::vector<double> x0{0.5, 0.5};
  };

  MotivatingProblem() : MotivatingProblem(Options{}) {}
  explicit MotivatingProblem(Options opts) : opts_(std::move(opts)) {
    if (opts_.x0.size() != 2) throw ConfigError("motivating: x0 must have 2 entries");
    if (opts_.batch_size == 0) throw ConfigError("motivating: batch_size must be >= 1");
  }

  static Batch full_batch() { return {kNoise, -kNoise}; }

  std::size_t dim() const { return 2; }
  std::size_t num_constraints() const { return 1; }
  std::string name() const { return "motivating"; }

  Recorded record(ad::Tape& tape, std::span<const double> x, const Batch& batch) const {
    if (x.size() != 2) throw ShapeError("motivating: x must have 2 entries");
    if (batch.empty()) throw ConfigError("motivating: empty batch");
    const ad::Var x1 = tape.parameter(x[0]);
    const ad::Var x2 = tape.parameter(x[1]);
    const ad::Var xi = tape.constant(Matrix::column(batch));
    const ad::Var x2sq = square(x2);
    const ad::Var shifted = x1 + xi;
    const ad::Var g_plus = square(shifted + 2.0) + x2sq - 1.0;
    const ad::Var g_minus = square(shifted - 2.0) + x2sq - 1.0;
    return {square(x1) + x2sq, {mean(min(g_plus, g_minus))}};
  }

  Sampler make_sampler(std::uint64_t seed) const {
    return Sampler(opts_.batch_size, opts_.full_batch, seed);
  }
  std::vector<double> initial_point(std::uint64_t) const { return opts_.x0; }
  Batch eval_batch(Partition) const { return full_batch(); }
  std::size_t iterations_per_epoch() const { return 50; }
  double constraint_threshold() const { return 0.0; }

  /// E[g(x)] in closed form.
  static double expected_constraint(double x1, double x2) {
    double s = 0.0;
    for (double xi : {kNoise, -kNoise}) {
      const double gp = (x1 + 2.0 + xi) * (x1 + 2.0 + xi) + x2 * x2 - 1.0;
      const double gm = (x1 - 2.0 + xi) * (x1 - 2.0 + xi) + x2 * x2 - 1.0;
      s += 0.5 * std::min(gp, gm);
    }
    return s;
  }

  /// Distance to the nearer disk center.
  static double center_distance(double x1, double x2) {
    return std::min(std::hypot(x1 - 2.0, x2), std::hypot(x1 + 2.0, x2));
  }

 private:
  Options opts_;
};

static_assert(RunnableProblem<MotivatingProblem>);

}  // namespace spbm::problems
