#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spbm/tape.hpp"

namespace spbm {

/// Objective and constraint estimates recorded on a tape for one batch.
struct Recorded {
  ad::Var objective;
  std::vector<ad::Var> constraints;
};

/// Anything the optimizers can step on: records f-bar and the m constraint
/// estimates g-bar at a flat parameter vector x for a batch.
template <class P>
concept Problem = requires(const P& p, ad::Tape& tape, std::span<const double> x,
                           const typename P::Batch& batch) {
  typename P::Batch;
  { p.dim() } -> std::convertible_to<std::size_t>;
  { p.num_constraints() } -> std::convertible_to<std::size_t>;
  { p.record(tape, x, batch) } -> std::same_as<Recorded>;
};

/// Which held-out partition an evaluation batch is drawn from.
enum class Partition { kTrain, kValidation, kTest };

/// Problems the experiment harness can drive end to end: they also own a
/// batch sampler, an initializer and fixed evaluation batches.
template <class P>
concept RunnableProblem =
    Problem<P> && requires(const P& p, std::uint64_t seed, Partition part,
                           typename P::Sampler& sampler) {
      typename P::Sampler;
      { p.make_sampler(seed) } -> std::same_as<typename P::Sampler>;
      { sampler.next() } -> std::same_as<typename P::Batch>;
      { p.initial_point(seed) } -> std::same_as<std::vector<double>>;
      { p.eval_batch(part) } -> std::same_as<typename P::Batch>;
      { p.iterations_per_epoch() } -> std::convertible_to<std::size_t>;
      { p.constraint_threshold() } -> std::convertible_to<double>;
    };

/// Plain values of f-bar and g-bar.
struct Evaluation {
  double objective = 0.0;
  std::vector<double> constraints;
};

template <Problem P>
Evaluation evaluate(const P& problem, std::span<const double> x,
                    const typename P::Batch& batch) {
  ad::Tape tape;
  Recorded r = problem.record(tape, x, batch);
  Evaluation e;
  e.objective = r.objective.item();
  e.constraints.reserve(r.constraints.size());
  for (ad::Var g : r.constraints) e.constraints.push_back(g.item());
  return e;
}

}  // namespace spbm
