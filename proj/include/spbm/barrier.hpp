#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "spbm/errors.hpp"
#include "spbm/tape.hpp"

namespace spbm {

/// Glued penalty/barrier function family: a quadratic penalty branch
/// t + t^2/2 joined C1 to a logarithmic (QL) or reciprocal (QR) barrier.
enum class BarrierKind { kQuadraticLog, kQuadraticReciprocal };

constexpr std::string_view to_string(BarrierKind k) {
  return k == BarrierKind::kQuadraticLog ? "ql" : "qr";
}

inline BarrierKind parse_barrier(std::string_view s) {
  if (s == "ql" || s == "QL" || s == "log" || s == "logarithmic") {
    return BarrierKind::kQuadraticLog;
  }
  if (s == "qr" || s == "QR" || s == "reciprocal") {
    return BarrierKind::kQuadraticReciprocal;
  }
  throw ConfigError("unknown barrier kind '" + std::string(s) + "' (expected ql|qr)");
}

/// Point below which the barrier branch applies.
constexpr double breakpoint(BarrierKind k) {
  return k == BarrierKind::kQuadraticLog ? -0.5 : -1.0 / 3.0;
}

namespace detail {

inline double quadratic_branch(double t) { return t + 0.5 * t * t; }
inline double log_branch(double t) { return -0.25 * std::log(-2.0 * t) - 0.375; }
inline double reciprocal_branch(double t) {
  return (32.0 / 27.0) * (1.0 / (1.0 - t)) - 7.0 / 6.0;
}

inline double quadratic_slope(double t) { return 1.0 + t; }
inline double log_slope(double t) { return -1.0 / (4.0 * t); }
inline double reciprocal_slope(double t) {
  return (32.0 / 27.0) / ((1.0 - t) * (1.0 - t));
}

}  // namespace detail

inline double phi(BarrierKind kind, double t) {
  if (t >= breakpoint(kind)) return detail::quadratic_branch(t);
  return kind == BarrierKind::kQuadraticLog ? detail::log_branch(t)
                                            : detail::reciprocal_branch(t);
}

/// phi'(t); strictly positive everywhere.
inline double phi_prime(BarrierKind kind, double t) {
  if (t >= breakpoint(kind)) return detail::quadratic_slope(t);
  return kind == BarrierKind::kQuadraticLog ? detail::log_slope(t)
                                            : detail::reciprocal_slope(t);
}

/// p * phi(t / p). Nonpositive exactly when t is.
inline double transformed_constraint(BarrierKind kind, double t, double p) {
  if (!(p > 0.0)) {
    throw DomainError("transformed_constraint: penalty must be > 0, got " +
                      std::to_string(p));
  }
  return p * phi(kind, t / p);
}

/// phi applied elementwise on the tape.
inline ad::Var phi(BarrierKind kind, ad::Var t) {
  return t.tape()->map(
      t, [kind](double v) { return phi(kind, v); },
      [kind](double v) { return phi_prime(kind, v); });
}

/// p * phi(t / p) on the tape for a constant penalty p.
inline ad::Var transformed_constraint(BarrierKind kind, ad::Var t, double p) {
  if (!(p > 0.0)) {
    throw DomainError("transformed_constraint: penalty must be > 0, got " +
                      std::to_string(p));
  }
  return phi(kind, t / p) * p;
}

// ---------------------------------------------------------------------------
// Penalty parameter schedules.

/// Keeps p fixed.
struct IdentitySchedule {};

/// Shrinks p_i for violated constraints and grows it for satisfied ones:
///   p_i <- clip[(k + (1 - k) / (phi'(g_i) + eps)) * p_i]
struct AdaptiveSchedule {
  double k_adapt = 0.9;
  double eps = 1e-8;
  double clip_lo = 0.1;
  double clip_hi = 1.0;
  /// Evaluate phi' at g_i / p_i instead of g_i.
  bool divide_by_p = false;
};

/// Geometric decay pi0 * kappa^iter, optionally multiplied by the duals.
struct ClassicalSchedule {
  enum class Mode { kPureGeometric, kMultiplicativeOfLambda };
  double pi0 = 1.0;
  double kappa = 0.9;
  Mode mode = Mode::kPureGeometric;
};

using PenaltySchedule = std::variant<IdentitySchedule, AdaptiveSchedule, ClassicalSchedule>;

inline void validate(const PenaltySchedule& schedule) {
  if (const auto* a = std::get_if<AdaptiveSchedule>(&schedule)) {
    if (!(a->k_adapt > 0.0 && a->k_adapt < 1.0)) {
      throw ConfigError("adaptive schedule: k_adapt must lie in (0, 1)");
    }
    if (!(a->clip_lo > 0.0 && a->clip_lo < a->clip_hi)) {
      throw ConfigError("adaptive schedule: need 0 < clip_lo < clip_hi");
    }
    if (!(a->eps >= 0.0)) throw ConfigError("adaptive schedule: eps must be >= 0");
  } else if (const auto* c = std::get_if<ClassicalSchedule>(&schedule)) {
    if (!(c->pi0 > 0.0)) throw ConfigError("classical schedule: pi0 must be > 0");
    if (!(c->kappa > 0.0 && c->kappa < 1.0)) {
      throw ConfigError("classical schedule: kappa must lie in (0, 1)");
    }
  }
}

/// Next penalty vector. `lambda` is only read by the classical
/// multiplicative mode.
inline std::vector<double> update_penalty(const PenaltySchedule& schedule, BarrierKind kind,
                                          std::span<const double> g_bar,
                                          std::span<const double> p, std::size_t iter,
                                          std::span<const double> lambda = {}) {
  if (g_bar.size() != p.size()) {
    throw ShapeError("update_penalty: g_bar has " + std::to_string(g_bar.size()) +
                     " entries, p has " + std::to_string(p.size()));
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] > 0.0)) {
      throw DomainError("update_penalty: p[" + std::to_string(i) +
                        "] must be > 0, got " + std::to_string(p[i]));
    }
  }
  std::vector<double> out(p.begin(), p.end());
  if (const auto* a = std::get_if<AdaptiveSchedule>(&schedule)) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double arg = a->divide_by_p ? g_bar[i] / p[i] : g_bar[i];
      const double factor = a->k_adapt + (1.0 - a->k_adapt) / (phi_prime(kind, arg) + a->eps);
      out[i] = std::clamp(factor * p[i], a->clip_lo, a->clip_hi);
    }
  } else if (const auto* c = std::get_if<ClassicalSchedule>(&schedule)) {
    const double scale = c->pi0 * std::pow(c->kappa, static_cast<double>(iter));
    if (c->mode == ClassicalSchedule::Mode::kPureGeometric) {
      std::fill(out.begin(), out.end(), scale);
    } else {
      if (lambda.size() != out.size()) {
        throw ShapeError("update_penalty: multiplicative classical mode needs the dual vector");
      }
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale * lambda[i];
    }
  }
  return out;
}

}  // namespace spbm
