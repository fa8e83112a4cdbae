#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spbm/barrier.hpp"
#include "spbm/errors.hpp"
#include "spbm/problem.hpp"
#include "spbm/tape.hpp"

namespace spbm {

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double alpha = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Coupled L2 decay added to the gradient before the moment updates.
  double weight_decay = 0.0;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;

  static AdamState zeros(std::size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0}; }
};

/// One bias-corrected Adam step. Updates `adam` in place and returns x'.
inline std::vector<double> one_step_adam(AdamState& adam, std::span<const double> x,
                                         std::span<const double> y, const AdamConfig& cfg) {
  const std::size_t n = x.size();
  if (y.size() != n || adam.m.size() != n || adam.v.size() != n) {
    throw ShapeError("one_step_adam: x has " + std::to_string(n) + " entries, y " +
                     std::to_string(y.size()) + ", moments " + std::to_string(adam.m.size()));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(y[i])) {
      throw NumericError("one_step_adam: non-finite gradient at coordinate " + std::to_string(i), i);
    }
  }
  adam.t += 1;
  const double t = static_cast<double>(adam.t);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double g = cfg.weight_decay != 0.0 ? y[i] + cfg.weight_decay * x[i] : y[i];
    adam.m[i] = cfg.beta1 * adam.m[i] + (1.0 - cfg.beta1) * g;
    adam.v[i] = cfg.beta2 * adam.v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = adam.m[i] / c1;
    const double v_hat = adam.v[i] / c2;
    out[i] = x[i] - cfg.alpha * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
  return out;
}

namespace detail {

inline void require_finite(std::span<const double> v, std::string_view what) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw NumericError(std::string(what) + " is non-finite at index " + std::to_string(i), i);
    }
  }
}

inline std::vector<double> values(std::span<const ad::Var> vars) {
  std::vector<double> out;
  out.reserve(vars.size());
  for (ad::Var v : vars) out.push_back(v.item());
  return out;
}

inline ad::Var sum_terms(ad::Var base, std::span<const ad::Var> terms) {
  ad::Var acc = base;
  for (ad::Var t : terms) acc = acc + t;
  return acc;
}

/// s <- delta * s + (1 - delta) * x
inline void ema_into(std::vector<double>& s, std::span<const double> x, double delta) {
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = delta * s[i] + (1.0 - delta) * x[i];
}

inline double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stochastic penalty-barrier method

struct SpbmConfig {
  double alpha = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  /// Dual EMA coefficient in [0, 1).
  double gamma = 0.9;
  /// Moreau (proximal) coefficient >= 0.
  double mu = 0.0;
  /// Prox-center EMA coefficient in [0, 1).
  double delta = 0.9;
  std::size_t batch_size = 1;
  BarrierKind barrier = BarrierKind::kQuadraticLog;
  PenaltySchedule schedule = IdentitySchedule{};
  /// Initial duals; empty means all ones.
  std::vector<double> lambda0;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;
  /// Weight each barrier term by p_i, i.e. lambda_i * p_i * phi(g_i / p_i).
  bool scale_by_p = true;
  /// Duals above this abort the run.
  double dual_overflow = 1e12;

  AdamConfig adam() const { return {alpha, beta1, beta2, adam_eps, weight_decay}; }
};

inline void validate(const SpbmConfig& c) {
  if (!(c.alpha > 0.0)) throw ConfigError("spbm: alpha must be > 0");
  if (!(c.gamma >= 0.0 && c.gamma < 1.0)) throw ConfigError("spbm: gamma must lie in [0, 1)");
  if (!(c.delta >= 0.0 && c.delta < 1.0)) throw ConfigError("spbm: delta must lie in [0, 1)");
  if (!(c.mu >= 0.0)) throw ConfigError("spbm: mu must be >= 0");
  if (c.batch_size < 1) throw ConfigError("spbm: batch_size must be >= 1");
  for (double l : c.lambda0) {
    if (!(l > 0.0)) throw ConfigError("spbm: lambda0 must be positive");
  }
  validate(c.schedule);
}

struct SpbmState {
  std::vector<double> x;
  std::vector<double> lambda;
  std::vector<double> p;
  std::vector<double> s;
  AdamState adam;
  std::size_t iter = 0;
  /// f-bar and g-bar at the pre-step iterate of the most recent step.
  double last_objective = 0.0;
  std::vector<double> last_constraints;

  static SpbmState init(std::vector<double> x0, std::size_t m, const SpbmConfig& cfg) {
    validate(cfg);
    if (!cfg.lambda0.empty() && cfg.lambda0.size() != m) {
      throw ConfigError("spbm: lambda0 has " + std::to_string(cfg.lambda0.size()) +
                        " entries for " + std::to_string(m) + " constraints");
    }
    SpbmState st;
    st.s = x0;
    st.adam = AdamState::zeros(x0.size());
    st.x = std::move(x0);
    st.lambda = cfg.lambda0.empty() ? std::vector<double>(m, 1.0) : cfg.lambda0;
    st.p.assign(m, 1.0);
    return st;
  }
};

/// lambda' = gamma * lambda + (1 - gamma) * lambda .* phi'(g_bar ./ p)
inline std::vector<double> dual_update(std::span<const double> lambda,
                                       std::span<const double> g_bar,
                                       std::span<const double> p, double gamma,
                                       BarrierKind kind) {
  if (lambda.size() != g_bar.size() || p.size() != g_bar.size()) {
    throw ShapeError("dual_update: lambda, g_bar and p must have equal length");
  }
  std::vector<double> out(lambda.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(lambda[i] > 0.0)) {
      throw DomainError("dual_update: lambda[" + std::to_string(i) + "] must be > 0");
    }
    if (!(p[i] > 0.0)) throw DomainError("dual_update: p[" + std::to_string(i) + "] must be > 0");
    out[i] = gamma * lambda[i] + (1.0 - gamma) * lambda[i] * phi_prime(kind, g_bar[i] / p[i]);
  }
  return out;
}

/// Records the stochastic Lagrangian f + sum_i lambda_i [p_i] phi(g_i / p_i)
/// with lambda and p held constant.
inline ad::Var record_lagrangian(const Recorded& r, std::span<const double> lambda,
                                 std::span<const double> p, BarrierKind kind, bool scale_by_p) {
  std::vector<ad::Var> terms;
  terms.reserve(r.constraints.size());
  for (std::size_t i = 0; i < r.constraints.size(); ++i) {
    ad::Var barrier = phi(kind, r.constraints[i] / p[i]);
    const double w = scale_by_p ? lambda[i] * p[i] : lambda[i];
    terms.push_back(barrier * w);
  }
  return detail::sum_terms(r.objective, terms);
}

/// Lines (a)-(c) of an SPBM iteration: updated duals and penalties, and the
/// search direction y = grad L(x) + mu (x - s) at the current iterate.
struct SpbmDirection {
  std::vector<double> lambda;
  std::vector<double> p;
  std::vector<double> g_bar;
  double objective = 0.0;
  ad::Gradient y;
};

template <Problem P>
SpbmDirection spbm_direction(const SpbmState& state, const SpbmConfig& cfg, const P& problem,
                             const typename P::Batch& batch) {
  ad::Tape tape;
  const Recorded rec = problem.record(tape, state.x, batch);
  if (rec.constraints.size() != state.lambda.size()) {
    throw ShapeError("spbm_step: problem recorded " + std::to_string(rec.constraints.size()) +
                     " constraints, state has " + std::to_string(state.lambda.size()));
  }
  SpbmDirection d;
  d.g_bar = detail::values(rec.constraints);
  d.objective = rec.objective.item();
  detail::require_finite(d.g_bar, "spbm_step: constraint estimate");
  if (!std::isfinite(d.objective)) throw NumericError("spbm_step: objective estimate is non-finite");

  d.lambda = dual_update(state.lambda, d.g_bar, state.p, cfg.gamma, cfg.barrier);
  for (std::size_t i = 0; i < d.lambda.size(); ++i) {
    if (!(d.lambda[i] <= cfg.dual_overflow)) {
      throw NumericError("spbm_step: dual variable " + std::to_string(i) + " overflowed (" +
                             std::to_string(d.lambda[i]) + " at iteration " +
                             std::to_string(state.iter) +
                             "); increase gamma or raise the penalty floor",
                         i);
    }
  }
  d.p = update_penalty(cfg.schedule, cfg.barrier, d.g_bar, state.p, state.iter, d.lambda);

  const ad::Var lagrangian = record_lagrangian(rec, d.lambda, d.p, cfg.barrier, cfg.scale_by_p);
  d.y = tape.backward(lagrangian);
  for (std::size_t i = 0; i < d.y.size(); ++i) d.y[i] += cfg.mu * (state.x[i] - state.s[i]);
  return d;
}

/// One iteration of SPBM on `batch`: dual update, penalty update, gradient of
/// the proximal Lagrangian, Adam step, prox-center update.
template <Problem P>
SpbmState spbm_step(SpbmState state, const SpbmConfig& cfg, const P& problem,
                    const typename P::Batch& batch) {
  SpbmDirection d = spbm_direction(state, cfg, problem, batch);
  state.x = one_step_adam(state.adam, state.x, d.y, cfg.adam());
  detail::ema_into(state.s, state.x, cfg.delta);
  state.lambda = std::move(d.lambda);
  state.p = std::move(d.p);
  state.last_objective = d.objective;
  state.last_constraints = std::move(d.g_bar);
  state.iter += 1;
  return state;
}

// ---------------------------------------------------------------------------
// Fixed-weight penalty baseline: f + rho * ||g||^2

enum class BaseOptimizer { kSgd, kAdam };

enum class PenaltyForm {
  /// rho * ||g-bar||^2, penalizing both signs.
  kSquared,
  /// rho * sum_i g-bar_i, the soft-constraint loss common in PINN training.
  kLinear,
};

struct PenalizedConfig {
  double rho = 0.0;
  double lr = 1e-3;
  BaseOptimizer optimizer = BaseOptimizer::kAdam;
  PenaltyForm form = PenaltyForm::kSquared;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;
};

inline void validate(const PenalizedConfig& c) {
  if (!(c.rho >= 0.0)) throw ConfigError("penalized: rho must be >= 0");
  if (!(c.lr > 0.0)) throw ConfigError("penalized: lr must be > 0");
}

struct PenalizedState {
  std::vector<double> x;
  AdamState adam;
  std::size_t iter = 0;
  double last_objective = 0.0;
  std::vector<double> last_constraints;

  static PenalizedState init(std::vector<double> x0, const PenalizedConfig& cfg) {
    validate(cfg);
    PenalizedState st;
    st.adam = AdamState::zeros(x0.size());
    st.x = std::move(x0);
    return st;
  }
};

/// f + rho * ||g||^2 (or rho * sum g in the linear form).
inline ad::Var record_penalized(const Recorded& r, const PenalizedConfig& cfg) {
  ad::Var loss = r.objective;
  if (cfg.rho == 0.0) return loss;
  for (ad::Var g : r.constraints) {
    loss = loss + (cfg.form == PenaltyForm::kSquared ? square(g) : g) * cfg.rho;
  }
  return loss;
}

template <Problem P>
PenalizedState penalized_step(PenalizedState state, const PenalizedConfig& cfg,
                              const P& problem, const typename P::Batch& batch) {
  ad::Tape tape;
  const Recorded rec = problem.record(tape, state.x, batch);
  const ad::Var loss = record_penalized(rec, cfg);
  if (!std::isfinite(loss.item())) {
    throw NumericError("penalized_step: non-finite loss at iteration " + std::to_string(state.iter));
  }
  ad::Gradient y = tape.backward(loss);
  if (cfg.optimizer == BaseOptimizer::kAdam) {
    state.x = one_step_adam(state.adam, state.x, y,
                            {cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay});
  } else {
    detail::require_finite(y, "penalized_step: gradient");
    for (std::size_t i = 0; i < y.size(); ++i) {
      state.x[i] -= cfg.lr * (y[i] + cfg.weight_decay * state.x[i]);
    }
  }
  state.last_objective = rec.objective.item();
  state.last_constraints = detail::values(rec.constraints);
  state.iter += 1;
  return state;
}

// ---------------------------------------------------------------------------
// Simplified stochastic augmented Lagrangian baseline. Inequalities become
// equalities through max(g, 0).

struct SalmConfig {
  double lr = 1e-3;
  double dual_lr = 1e-2;
  double rho = 1.0;
  double mu = 0.0;
  double delta = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;
};

inline void validate(const SalmConfig& c) {
  if (!(c.lr > 0.0)) throw ConfigError("salm: lr must be > 0");
  if (!(c.dual_lr > 0.0)) throw ConfigError("salm: dual_lr must be > 0");
  if (!(c.rho >= 0.0)) throw ConfigError("salm: rho must be >= 0");
  if (!(c.mu >= 0.0)) throw ConfigError("salm: mu must be >= 0");
  if (!(c.delta >= 0.0 && c.delta < 1.0)) throw ConfigError("salm: delta must lie in [0, 1)");
}

struct SalmState {
  std::vector<double> x;
  std::vector<double> lambda;
  std::vector<double> s;
  AdamState adam;
  std::size_t iter = 0;
  double last_objective = 0.0;
  std::vector<double> last_constraints;

  static SalmState init(std::vector<double> x0, std::size_t m, const SalmConfig& cfg) {
    validate(cfg);
    SalmState st;
    st.s = x0;
    st.adam = AdamState::zeros(x0.size());
    st.x = std::move(x0);
    st.lambda.assign(m, 0.0);
    return st;
  }
};

template <Problem P>
SalmState salm_step(SalmState state, const SalmConfig& cfg, const P& problem,
                    const typename P::Batch& batch) {
  ad::Tape tape;
  const Recorded rec = problem.record(tape, state.x, batch);
  if (rec.constraints.size() != state.lambda.size()) {
    throw ShapeError("salm_step: problem recorded " + std::to_string(rec.constraints.size()) +
                     " constraints, state has " + std::to_string(state.lambda.size()));
  }
  const std::vector<double> g_bar = detail::values(rec.constraints);
  detail::require_finite(g_bar, "salm_step: constraint estimate");

  ad::Var loss = rec.objective;
  std::vector<double> clamped(g_bar.size());
  for (std::size_t i = 0; i < g_bar.size(); ++i) {
    ad::Var gc = relu(rec.constraints[i]);
    clamped[i] = gc.item();
    loss = loss + gc * state.lambda[i];
    if (cfg.rho != 0.0) loss = loss + square(gc) * (0.5 * cfg.rho);
  }
  if (!std::isfinite(loss.item())) {
    throw NumericError("salm_step: non-finite loss at iteration " + std::to_string(state.iter));
  }
  ad::Gradient y = tape.backward(loss);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += cfg.mu * (state.x[i] - state.s[i]);

  state.x = one_step_adam(state.adam, state.x, y,
                          {cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay});
  for (std::size_t i = 0; i < state.lambda.size(); ++i) {
    state.lambda[i] = std::max(state.lambda[i] + cfg.dual_lr * clamped[i], 0.0);
  }
  detail::ema_into(state.s, state.x, cfg.delta);
  state.last_objective = rec.objective.item();
  state.last_constraints = g_bar;
  state.iter += 1;
  return state;
}

}  // namespace spbm
