#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "spbm/barrier.hpp"
#include "spbm/harness/json_fields.hpp"
#include "spbm/optim.hpp"

namespace spbm::harness {

inline const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names{"spbm", "adam", "penalized", "salm"};
  return names;
}

/// A parsed method block. `label` names the output directory and defaults to
/// the method name; `adam` is the penalized method with rho = 0.
struct MethodSpec {
  std::string name;
  std::string label;
  std::variant<SpbmConfig, PenalizedConfig, SalmConfig> config;
};

namespace detail {

inline PenaltySchedule parse_schedule(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "identity") return IdentitySchedule{};
    if (s == "adaptive") return AdaptiveSchedule{};
    if (s == "classical") return ClassicalSchedule{};
    throw ConfigError("spbm.schedule: unknown schedule '" + s +
                      "' (expected identity|adaptive|classical)");
  }
  Fields f(j, "spbm.schedule");
  std::string type;
  f.read("type", type);
  PenaltySchedule out;
  if (type == "identity") {
    out = IdentitySchedule{};
  } else if (type == "adaptive") {
    AdaptiveSchedule a;
    f.read("k", a.k_adapt);
    f.read("eps", a.eps);
    f.read("clip_lo", a.clip_lo);
    f.read("clip_hi", a.clip_hi);
    f.read("divide_by_p", a.divide_by_p);
    out = a;
  } else if (type == "classical") {
    ClassicalSchedule c;
    std::string mode = "geometric";
    f.read("pi0", c.pi0);
    f.read("kappa", c.kappa);
    f.read("mode", mode);
    if (mode == "geometric") {
      c.mode = ClassicalSchedule::Mode::kPureGeometric;
    } else if (mode == "lambda") {
      c.mode = ClassicalSchedule::Mode::kMultiplicativeOfLambda;
    } else {
      throw ConfigError("spbm.schedule.mode: expected geometric|lambda, got '" + mode + "'");
    }
    out = c;
  } else {
    throw ConfigError("spbm.schedule.type: unknown schedule '" + type +
                      "' (expected identity|adaptive|classical)");
  }
  f.finish();
  validate(out);
  return out;
}

}  // namespace detail

inline MethodSpec parse_method(const json& j) {
  if (!j.is_object() || !j.contains("name")) {
    throw ConfigError("method: expected an object with a 'name' key");
  }
  MethodSpec spec;
  Fields f(j, "method");
  f.read("name", spec.name);
  spec.label = spec.name;
  f.read("label", spec.label);
  const std::string where = spec.label;

  if (spec.name == "spbm") {
    SpbmConfig c;
    std::string barrier = "ql";
    f.read("alpha", c.alpha);
    f.read("beta1", c.beta1);
    f.read("beta2", c.beta2);
    f.read("gamma", c.gamma);
    f.read("mu", c.mu);
    f.read("delta", c.delta);
    f.read("barrier", barrier);
    f.read("lambda0", c.lambda0);
    f.read("eps", c.adam_eps);
    f.read("weight_decay", c.weight_decay);
    f.read("scale_by_p", c.scale_by_p);
    f.read("dual_overflow", c.dual_overflow);
    c.barrier = parse_barrier(barrier);
    if (const json* s = f.raw("schedule")) c.schedule = detail::parse_schedule(*s);
    validate(c);
    spec.config = c;
  } else if (spec.name == "adam" || spec.name == "penalized") {
    PenalizedConfig c;
    if (spec.name == "adam") {
      f.read("alpha", c.lr);
    } else {
      std::string optimizer = "adam", form = "squared";
      f.read("rho", c.rho);
      f.read("lr", c.lr);
      f.read("optimizer", optimizer);
      f.read("form", form);
      if (optimizer == "adam") {
        c.optimizer = BaseOptimizer::kAdam;
      } else if (optimizer == "sgd") {
        c.optimizer = BaseOptimizer::kSgd;
      } else {
        throw ConfigError(where + ".optimizer: expected adam|sgd, got '" + optimizer + "'");
      }
      if (form == "squared") {
        c.form = PenaltyForm::kSquared;
      } else if (form == "linear") {
        c.form = PenaltyForm::kLinear;
      } else {
        throw ConfigError(where + ".form: expected squared|linear, got '" + form + "'");
      }
    }
    f.read("beta1", c.beta1);
    f.read("beta2", c.beta2);
    f.read("eps", c.adam_eps);
    f.read("weight_decay", c.weight_decay);
    validate(c);
    spec.config = c;
  } else if (spec.name == "salm") {
    SalmConfig c;
    f.read("lr", c.lr);
    f.read("dual_lr", c.dual_lr);
    f.read("rho", c.rho);
    f.read("mu", c.mu);
    f.read("delta", c.delta);
    f.read("beta1", c.beta1);
    f.read("beta2", c.beta2);
    f.read("eps", c.adam_eps);
    f.read("weight_decay", c.weight_decay);
    validate(c);
    spec.config = c;
  } else {
    throw ConfigError("unknown method '" + spec.name + "' (expected spbm|adam|penalized|salm)");
  }
  f.finish();
  if (spec.label.empty() || spec.label.find_first_of("/\\") != std::string::npos) {
    throw ConfigError("method.label: '" + spec.label + "' is not a valid directory name");
  }
  return spec;
}

/// Per-method state diagnostics logged next to the metrics.
struct Diagnostics {
  double lambda_norm = 0.0;
  double p_min = 0.0;
  double p_max = 0.0;
  double prox_dist = 0.0;
};

/// Type-erased optimizer state driven by the experiment loop.
class MethodRunner {
 public:
  MethodRunner(const MethodSpec& spec, std::vector<double> x0, std::size_t m) : spec_(spec) {
    std::visit(
        [&](const auto& cfg) {
          using C = std::decay_t<decltype(cfg)>;
          if constexpr (std::is_same_v<C, SpbmConfig>) {
            state_ = SpbmState::init(std::move(x0), m, cfg);
          } else if constexpr (std::is_same_v<C, PenalizedConfig>) {
            state_ = PenalizedState::init(std::move(x0), cfg);
          } else {
            state_ = SalmState::init(std::move(x0), m, cfg);
          }
        },
        spec_.config);
  }

  template <Problem P>
  void step(const P& problem, const typename P::Batch& batch) {
    if (auto* s = std::get_if<SpbmState>(&state_)) {
      *s = spbm_step(std::move(*s), std::get<SpbmConfig>(spec_.config), problem, batch);
    } else if (auto* s = std::get_if<PenalizedState>(&state_)) {
      *s = penalized_step(std::move(*s), std::get<PenalizedConfig>(spec_.config), problem, batch);
    } else {
      auto& st = std::get<SalmState>(state_);
      st = salm_step(std::move(st), std::get<SalmConfig>(spec_.config), problem, batch);
    }
  }

  std::span<const double> x() const {
    return std::visit([](const auto& s) { return std::span<const double>(s.x); }, state_);
  }

  Diagnostics diagnostics() const {
    Diagnostics d;
    if (const auto* s = std::get_if<SpbmState>(&state_)) {
      d.lambda_norm = norm(s->lambda);
      if (!s->p.empty()) {
        d.p_min = *std::min_element(s->p.begin(), s->p.end());
        d.p_max = *std::max_element(s->p.begin(), s->p.end());
      }
      d.prox_dist = spbm::detail::distance(s->x, s->s);
    } else if (const auto* s = std::get_if<SalmState>(&state_)) {
      d.lambda_norm = norm(s->lambda);
      d.prox_dist = spbm::detail::distance(s->x, s->s);
    }
    return d;
  }

 private:
  static double norm(std::span<const double> v) {
    double s = 0.0;
    for (double a : v) s += a * a;
    return std::sqrt(s);
  }

  MethodSpec spec_;
  std::variant<SpbmState, PenalizedState, SalmState> state_;
};

}  // namespace spbm::harness
