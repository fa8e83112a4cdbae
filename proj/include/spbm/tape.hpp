#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "spbm/errors.hpp"
#include "spbm/matrix.hpp"

namespace spbm::ad {

enum class Op : std::uint8_t {
  kConstant,
  kParameter,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kAbs,
  kSquare,
  kSqrt,
  kExp,
  kLog,
  kSin,
  kCos,
  kTanh,
  kRelu,
  kSigmoid,
  kMatMul,
  kReduceMean,
  kReduceSum,
  kMin,
  kMax,
  kFrobeniusNorm,
  // Elementwise unary op with caller-supplied value and derivative.
  kMap,
};

constexpr std::string_view op_name(Op op) {
  switch (op) {
    case Op::kConstant: return "constant";
    case Op::kParameter: return "parameter";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kNeg: return "neg";
    case Op::kAbs: return "abs";
    case Op::kSquare: return "square";
    case Op::kSqrt: return "sqrt";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kSin: return "sin";
    case Op::kCos: return "cos";
    case Op::kTanh: return "tanh";
    case Op::kRelu: return "relu";
    case Op::kSigmoid: return "sigmoid";
    case Op::kMatMul: return "matmul";
    case Op::kReduceMean: return "reduce-mean";
    case Op::kReduceSum: return "reduce-sum";
    case Op::kMin: return "min-elementwise";
    case Op::kMax: return "max-elementwise";
    case Op::kFrobeniusNorm: return "frobenius-norm";
    case Op::kMap: return "map";
  }
  return "?";
}

constexpr bool is_unary_elementwise(Op op) {
  switch (op) {
    case Op::kNeg: case Op::kAbs: case Op::kSquare: case Op::kSqrt:
    case Op::kExp: case Op::kLog: case Op::kSin: case Op::kCos:
    case Op::kTanh: case Op::kRelu: case Op::kSigmoid: case Op::kMap:
      return true;
    default:
      return false;
  }
}

constexpr bool is_binary_elementwise(Op op) {
  return op == Op::kAdd || op == Op::kSub || op == Op::kMul ||
         op == Op::kDiv || op == Op::kMin || op == Op::kMax;
}

struct Node {
  std::size_t id = 0;
  Op op = Op::kConstant;
  std::vector<std::size_t> parents;
  Matrix value;
  /// d(value)/d(parent) for unary elementwise ops, same shape as value.
  /// Binary ops read their parents' values instead.
  Matrix local_partial;
  bool requires_grad = false;
};

/// Gradient entries aligned with the registered parameters, flattened in
/// registration order (row-major within each parameter).
using Gradient = std::vector<double>;

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  const Matrix& value() const;
  /// Value of a scalar node.
  double item() const { return value().item(); }
  std::size_t rows() const { return value().rows; }
  std::size_t cols() const { return value().cols; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode tape. Values are computed eagerly when a node is recorded;
/// parents always precede children, so the node list is topologically sorted.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value) {
    Node n;
    n.op = Op::kConstant;
    n.value = std::move(value);
    return push(std::move(n));
  }
  Var constant(double value) { return constant(Matrix::scalar(value)); }

  /// Registers a differentiable leaf. Registration order defines the layout
  /// of the gradient returned by backward().
  Var parameter(Matrix value) {
    Node n;
    n.op = Op::kParameter;
    n.requires_grad = true;
    n.value = std::move(value);
    Var v = push(std::move(n));
    params_.push_back(v.id());
    param_count_ += nodes_.back().value.size();
    return v;
  }
  Var parameter(double value) { return parameter(Matrix::scalar(value)); }

  /// Generic entry point for every non-leaf op except kMap.
  Var record(Op op, std::initializer_list<Var> parents) {
    if (op == Op::kConstant || op == Op::kParameter || op == Op::kMap) {
      throw ConfigError(std::string("record: op '") + std::string(op_name(op)) +
                        "' cannot be recorded from parents");
    }
    Node n;
    n.op = op;
    for (Var p : parents) n.parents.push_back(check_parent(p, op));
    const std::size_t arity = n.parents.size();
    const std::size_t expected =
        (is_binary_elementwise(op) || op == Op::kMatMul) ? 2 : 1;
    if (arity != expected) {
      throw ShapeError(std::string(op_name(op)) + ": expected " +
                       std::to_string(expected) + " operand(s), got " +
                       std::to_string(arity));
    }
    for (std::size_t pid : n.parents) n.requires_grad |= nodes_[pid].requires_grad;
    evaluate(n);
    return push(std::move(n));
  }

  /// Elementwise unary op given value and derivative functions of one
  /// argument. Used for ops living outside the tape (e.g. penalty/barrier).
  template <class F, class DF>
  Var map(Var a, F&& f, DF&& df) {
    Node n;
    n.op = Op::kMap;
    n.parents.push_back(check_parent(a, Op::kMap));
    n.requires_grad = nodes_[a.id()].requires_grad;
    const Matrix& x = nodes_[a.id()].value;
    n.value = Matrix(x.rows, x.cols);
    n.local_partial = Matrix(x.rows, x.cols);
    for (std::size_t i = 0; i < x.size(); ++i) {
      n.value.data[i] = f(x.data[i]);
      n.local_partial.data[i] = df(x.data[i]);
    }
    return push(std::move(n));
  }

  const Node& node(std::size_t id) const { return nodes_.at(id); }
  std::size_t size() const noexcept { return nodes_.size(); }
  /// Total scalar parameter count n.
  std::size_t num_parameters() const noexcept { return param_count_; }
  const std::vector<std::size_t>& parameter_ids() const noexcept { return params_; }

  /// d(root)/d(parameters) in one reverse sweep.
  Gradient backward(Var root) const {
    const std::size_t rid = check_parent(root, Op::kReduceSum);
    if (!nodes_[rid].value.is_scalar()) {
      throw ShapeError("backward: root must be scalar, got " +
                       nodes_[rid].value.shape_string());
    }
    std::vector<Matrix> adj(rid + 1);
    adj[rid] = Matrix::scalar(1.0);
    for (std::size_t i = rid + 1; i-- > 0;) {
      const Node& n = nodes_[i];
      if (!n.requires_grad || n.parents.empty() || adj[i].size() == 0) continue;
      propagate(n, adj);
    }
    Gradient g;
    g.reserve(param_count_);
    for (std::size_t pid : params_) {
      const std::size_t sz = nodes_[pid].value.size();
      if (pid <= rid && adj[pid].size() == sz) {
        g.insert(g.end(), adj[pid].data.begin(), adj[pid].data.end());
      } else {
        g.insert(g.end(), sz, 0.0);
      }
    }
    return g;
  }

 private:
  Var push(Node n) {
    n.id = nodes_.size();
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.back().id);
  }

  std::size_t check_parent(Var p, Op op) const {
    if (p.tape() != this || p.id() >= nodes_.size()) {
      throw ConfigError(std::string(op_name(op)) + ": operand node " +
                        std::to_string(p.id()) + " does not belong to this tape");
    }
    return p.id();
  }

  static double elementwise(Op op, double a, double b) {
    switch (op) {
      case Op::kAdd: return a + b;
      case Op::kSub: return a - b;
      case Op::kMul: return a * b;
      case Op::kDiv: return a / b;
      case Op::kMin: return a <= b ? a : b;
      case Op::kMax: return a >= b ? a : b;
      default: return 0.0;
    }
  }

  // Value and cached local partial of built-in unary ops.
  // Subgradients: abs'(0) = 0, relu'(0) = 0.
  static std::pair<double, double> unary(Op op, double x) {
    switch (op) {
      case Op::kNeg: return {-x, -1.0};
      case Op::kAbs: return {std::abs(x), x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0)};
      case Op::kSquare: return {x * x, 2.0 * x};
      case Op::kSqrt: {
        const double r = std::sqrt(x);
        return {r, 0.5 / r};
      }
      case Op::kExp: {
        const double e = std::exp(x);
        return {e, e};
      }
      case Op::kLog: return {std::log(x), 1.0 / x};
      case Op::kSin: return {std::sin(x), std::cos(x)};
      case Op::kCos: return {std::cos(x), -std::sin(x)};
      case Op::kTanh: {
        const double t = std::tanh(x);
        return {t, 1.0 - t * t};
      }
      case Op::kRelu: return {x > 0 ? x : 0.0, x > 0 ? 1.0 : 0.0};
      case Op::kSigmoid: {
        const double s = x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                                : std::exp(x) / (1.0 + std::exp(x));
        return {s, s * (1.0 - s)};
      }
      default: return {0.0, 0.0};
    }
  }

  void evaluate(Node& n) const {
    if (is_unary_elementwise(n.op)) {
      const Matrix& x = nodes_[n.parents[0]].value;
      n.value = Matrix(x.rows, x.cols);
      n.local_partial = Matrix(x.rows, x.cols);
      for (std::size_t i = 0; i < x.size(); ++i) {
        auto [v, d] = unary(n.op, x.data[i]);
        n.value.data[i] = v;
        n.local_partial.data[i] = d;
      }
      return;
    }
    if (is_binary_elementwise(n.op)) {
      const Matrix& a = nodes_[n.parents[0]].value;
      const Matrix& b = nodes_[n.parents[1]].value;
      if (!a.same_shape(b) && !a.is_scalar() && !b.is_scalar()) {
        throw ShapeError(std::string(op_name(n.op)) + ": incompatible shapes " +
                         a.shape_string() + " and " + b.shape_string());
      }
      const Matrix& shape = a.is_scalar() ? b : a;
      n.value = Matrix(shape.rows, shape.cols);
      const bool as = a.size() == 1, bs = b.size() == 1;
      for (std::size_t i = 0; i < n.value.size(); ++i) {
        n.value.data[i] =
            elementwise(n.op, a.data[as ? 0 : i], b.data[bs ? 0 : i]);
      }
      return;
    }
    const Matrix& a = nodes_[n.parents[0]].value;
    switch (n.op) {
      case Op::kMatMul: {
        const Matrix& b = nodes_[n.parents[1]].value;
        if (a.cols != b.rows) {
          throw ShapeError("matmul: incompatible shapes " + a.shape_string() +
                           " and " + b.shape_string());
        }
        n.value = Matrix(a.rows, b.cols);
        matmul_accumulate(a, b, n.value);
        return;
      }
      case Op::kReduceSum:
      case Op::kReduceMean: {
        if (a.size() == 0) {
          throw ShapeError(std::string(op_name(n.op)) + ": empty operand");
        }
        double s = 0.0;
        for (double v : a.data) s += v;
        if (n.op == Op::kReduceMean) s /= static_cast<double>(a.size());
        n.value = Matrix::scalar(s);
        return;
      }
      case Op::kFrobeniusNorm: {
        double s = 0.0;
        for (double v : a.data) s += v * v;
        n.value = Matrix::scalar(std::sqrt(s));
        return;
      }
      default:
        return;
    }
  }

  static void ensure_shape(Matrix& target, const Matrix& shape) {
    if (target.size() == 0) target = Matrix(shape.rows, shape.cols);
  }

  // Adds `contrib` (output-shaped) into the parent adjoint, summing when the
  // parent was broadcast from a scalar.
  void add_broadcast(std::vector<Matrix>& adj, std::size_t pid,
                     const Matrix& out_adj, auto&& scale) const {
    const Node& p = nodes_[pid];
    if (!p.requires_grad) return;
    ensure_shape(adj[pid], p.value);
    Matrix& t = adj[pid];
    if (p.value.size() == 1 && out_adj.size() != 1) {
      double s = 0.0;
      for (std::size_t i = 0; i < out_adj.size(); ++i) s += out_adj.data[i] * scale(i);
      t.data[0] += s;
    } else {
      for (std::size_t i = 0; i < out_adj.size(); ++i) t.data[i] += out_adj.data[i] * scale(i);
    }
  }

  void propagate(const Node& n, std::vector<Matrix>& adj) const {
    const Matrix& g = adj[n.id];
    if (is_unary_elementwise(n.op)) {
      add_broadcast(adj, n.parents[0], g,
                    [&](std::size_t i) { return n.local_partial.data[i]; });
      return;
    }
    if (is_binary_elementwise(n.op)) {
      const Matrix& a = nodes_[n.parents[0]].value;
      const Matrix& b = nodes_[n.parents[1]].value;
      const bool as = a.size() == 1, bs = b.size() == 1;
      auto av = [&](std::size_t i) { return a.data[as ? 0 : i]; };
      auto bv = [&](std::size_t i) { return b.data[bs ? 0 : i]; };
      switch (n.op) {
        case Op::kAdd:
          add_broadcast(adj, n.parents[0], g, [](std::size_t) { return 1.0; });
          add_broadcast(adj, n.parents[1], g, [](std::size_t) { return 1.0; });
          return;
        case Op::kSub:
          add_broadcast(adj, n.parents[0], g, [](std::size_t) { return 1.0; });
          add_broadcast(adj, n.parents[1], g, [](std::size_t) { return -1.0; });
          return;
        case Op::kMul:
          add_broadcast(adj, n.parents[0], g, bv);
          add_broadcast(adj, n.parents[1], g, av);
          return;
        case Op::kDiv:
          add_broadcast(adj, n.parents[0], g, [&](std::size_t i) { return 1.0 / bv(i); });
          add_broadcast(adj, n.parents[1], g, [&](std::size_t i) {
            const double d = bv(i);
            return -av(i) / (d * d);
          });
          return;
        case Op::kMin:
          // Ties route the whole derivative to the first operand.
          add_broadcast(adj, n.parents[0], g,
                        [&](std::size_t i) { return av(i) <= bv(i) ? 1.0 : 0.0; });
          add_broadcast(adj, n.parents[1], g,
                        [&](std::size_t i) { return av(i) <= bv(i) ? 0.0 : 1.0; });
          return;
        case Op::kMax:
          add_broadcast(adj, n.parents[0], g,
                        [&](std::size_t i) { return av(i) >= bv(i) ? 1.0 : 0.0; });
          add_broadcast(adj, n.parents[1], g,
                        [&](std::size_t i) { return av(i) >= bv(i) ? 0.0 : 1.0; });
          return;
        default:
          return;
      }
    }
    const std::size_t pa = n.parents[0];
    const Matrix& a = nodes_[pa].value;
    switch (n.op) {
      case Op::kMatMul: {
        const std::size_t pb = n.parents[1];
        const Matrix& b = nodes_[pb].value;
        if (nodes_[pa].requires_grad) {
          ensure_shape(adj[pa], a);
          matmul_a_bt_accumulate(g, b, adj[pa]);
        }
        if (nodes_[pb].requires_grad) {
          ensure_shape(adj[pb], b);
          matmul_at_b_accumulate(a, g, adj[pb]);
        }
        return;
      }
      case Op::kReduceSum:
      case Op::kReduceMean: {
        if (!nodes_[pa].requires_grad) return;
        ensure_shape(adj[pa], a);
        const double s = n.op == Op::kReduceMean
                             ? g.data[0] / static_cast<double>(a.size())
                             : g.data[0];
        for (double& v : adj[pa].data) v += s;
        return;
      }
      case Op::kFrobeniusNorm: {
        if (!nodes_[pa].requires_grad) return;
        ensure_shape(adj[pa], a);
        const double norm = n.value.data[0];
        // Subgradient 0 at the zero matrix.
        if (norm == 0.0) return;
        const double s = g.data[0] / norm;
        for (std::size_t i = 0; i < a.size(); ++i) adj[pa].data[i] += s * a.data[i];
        return;
      }
      default:
        return;
    }
  }

  std::vector<Node> nodes_;
  std::vector<std::size_t> params_;
  std::size_t param_count_ = 0;
};

inline const Matrix& Var::value() const { return tape_->node(id_).value; }

// Operator sugar. Mixed Var/double operands record the double as a constant.

inline Var operator+(Var a, Var b) { return a.tape()->record(Op::kAdd, {a, b}); }
inline Var operator-(Var a, Var b) { return a.tape()->record(Op::kSub, {a, b}); }
inline Var operator*(Var a, Var b) { return a.tape()->record(Op::kMul, {a, b}); }
inline Var operator/(Var a, Var b) { return a.tape()->record(Op::kDiv, {a, b}); }
inline Var operator-(Var a) { return a.tape()->record(Op::kNeg, {a}); }

inline Var operator+(Var a, double b) { return a + a.tape()->constant(b); }
inline Var operator+(double a, Var b) { return b.tape()->constant(a) + b; }
inline Var operator-(Var a, double b) { return a - a.tape()->constant(b); }
inline Var operator-(double a, Var b) { return b.tape()->constant(a) - b; }
inline Var operator*(Var a, double b) { return a * a.tape()->constant(b); }
inline Var operator*(double a, Var b) { return b.tape()->constant(a) * b; }
inline Var operator/(Var a, double b) { return a / a.tape()->constant(b); }
inline Var operator/(double a, Var b) { return b.tape()->constant(a) / b; }

inline Var abs(Var a) { return a.tape()->record(Op::kAbs, {a}); }
inline Var square(Var a) { return a.tape()->record(Op::kSquare, {a}); }
inline Var sqrt(Var a) { return a.tape()->record(Op::kSqrt, {a}); }
inline Var exp(Var a) { return a.tape()->record(Op::kExp, {a}); }
inline Var log(Var a) { return a.tape()->record(Op::kLog, {a}); }
inline Var sin(Var a) { return a.tape()->record(Op::kSin, {a}); }
inline Var cos(Var a) { return a.tape()->record(Op::kCos, {a}); }
inline Var tanh(Var a) { return a.tape()->record(Op::kTanh, {a}); }
inline Var relu(Var a) { return a.tape()->record(Op::kRelu, {a}); }
inline Var sigmoid(Var a) { return a.tape()->record(Op::kSigmoid, {a}); }
inline Var matmul(Var a, Var b) { return a.tape()->record(Op::kMatMul, {a, b}); }
inline Var mean(Var a) { return a.tape()->record(Op::kReduceMean, {a}); }
inline Var sum(Var a) { return a.tape()->record(Op::kReduceSum, {a}); }
inline Var min(Var a, Var b) { return a.tape()->record(Op::kMin, {a, b}); }
inline Var max(Var a, Var b) { return a.tape()->record(Op::kMax, {a, b}); }
inline Var frobenius_norm(Var a) { return a.tape()->record(Op::kFrobeniusNorm, {a}); }

/// Records one parameter per entry of `shapes`, consuming `x` in order.
/// Returns the parameter handles; throws if sizes disagree.
inline std::vector<Var> register_parameters(
    Tape& tape, std::span<const double> x,
    std::span<const std::pair<std::size_t, std::size_t>> shapes) {
  std::vector<Var> out;
  out.reserve(shapes.size());
  std::size_t offset = 0;
  for (auto [r, c] : shapes) {
    if (offset + r * c > x.size()) {
      throw ShapeError("register_parameters: parameter vector too short (" +
                       std::to_string(x.size()) + ")");
    }
    out.push_back(tape.parameter(
        Matrix(r, c, std::vector<double>(x.begin() + offset, x.begin() + offset + r * c))));
    offset += r * c;
  }
  if (offset != x.size()) {
    throw ShapeError("register_parameters: expected " + std::to_string(offset) +
                     " parameters, got " + std::to_string(x.size()));
  }
  return out;
}

/// Builds a fresh tape from `params` and returns the scalar root.
using RootBuilder = std::function<Var(Tape&, std::span<const double>)>;

/// Max over coordinates of |analytic - central difference| / (|analytic| + 1e-8).
inline double finite_difference_check(const RootBuilder& build,
                                      std::span<const double> params, double h) {
  if (!(h > 0.0)) throw DomainError("finite_difference_check: h must be > 0");
  Gradient analytic;
  {
    Tape tape;
    Var root = build(tape, params);
    analytic = tape.backward(root);
  }
  if (analytic.size() != params.size()) {
    throw ShapeError("finite_difference_check: builder registered " +
                     std::to_string(analytic.size()) + " parameters, expected " +
                     std::to_string(params.size()));
  }
  std::vector<double> probe(params.begin(), params.end());
  auto eval = [&]() {
    Tape tape;
    return build(tape, probe).item();
  };
  double worst = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double x0 = probe[i];
    probe[i] = x0 + h;
    const double fp = eval();
    probe[i] = x0 - h;
    const double fm = eval();
    probe[i] = x0;
    const double fd = (fp - fm) / (2.0 * h);
    worst = std::max(worst, std::abs(analytic[i] - fd) / (std::abs(analytic[i]) + 1e-8));
  }
  return worst;
}

}  // namespace spbm::ad
