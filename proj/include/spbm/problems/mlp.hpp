#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "spbm/errors.hpp"
#include "spbm/tape.hpp"

namespace spbm::problems {

enum class Activation { kTanh, kRelu };

inline Activation parse_activation(std::string_view s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "relu") return Activation::kRelu;
  throw ConfigError("unknown activation '" + std::string(s) + "' (expected tanh|relu)");
}

/// Fully connected network. Flat parameter layout: for each layer, the
/// weight matrix (in x out, row-major) followed by the bias row (1 x out).
struct MlpSpec {
  std::vector<std::size_t> widths;  // input, hidden..., output
  Activation activation = Activation::kTanh;

  std::size_t num_layers() const { return widths.size() < 2 ? 0 : widths.size() - 1; }

  void validate() const {
    if (widths.size() < 2) throw ConfigError("mlp: need at least input and output widths");
    for (std::size_t w : widths) {
      if (w == 0) throw ConfigError("mlp: layer widths must be positive");
    }
  }

  std::size_t num_params() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < num_layers(); ++l) n += (widths[l] + 1) * widths[l + 1];
    return n;
  }

  std::vector<std::pair<std::size_t, std::size_t>> shapes() const {
    std::vector<std::pair<std::size_t, std::size_t>> s;
    for (std::size_t l = 0; l < num_layers(); ++l) {
      s.emplace_back(widths[l], widths[l + 1]);
      s.emplace_back(1, widths[l + 1]);
    }
    return s;
  }

  /// Glorot-uniform weights for tanh, fan-in uniform (+-1/sqrt(in)) for
  /// relu; biases start at zero for tanh and fan-in uniform for relu.
  std::vector<double> init(std::uint64_t seed) const {
    validate();
    std::mt19937_64 rng(seed);
    std::vector<double> x;
    x.reserve(num_params());
    for (std::size_t l = 0; l < num_layers(); ++l) {
      const double in = static_cast<double>(widths[l]);
      const double out = static_cast<double>(widths[l + 1]);
      const double wb = activation == Activation::kTanh ? std::sqrt(6.0 / (in + out))
                                                        : 1.0 / std::sqrt(in);
      std::uniform_real_distribution<double> w(-wb, wb);
      for (std::size_t i = 0; i < widths[l] * widths[l + 1]; ++i) x.push_back(w(rng));
      std::uniform_real_distribution<double> b(-1.0 / std::sqrt(in), 1.0 / std::sqrt(in));
      for (std::size_t i = 0; i < widths[l + 1]; ++i) {
        x.push_back(activation == Activation::kTanh ? 0.0 : b(rng));
      }
    }
    return x;
  }
};

/// Weight and bias handles of one recorded network.
struct MlpParams {
  std::vector<ad::Var> weights;
  std::vector<ad::Var> biases;
};

/// Registers the network parameters from the flat vector x (consuming the
/// first num_params() entries and returning the rest).
inline MlpParams register_mlp(ad::Tape& tape, const MlpSpec& spec, std::span<const double> x) {
  spec.validate();
  if (x.size() != spec.num_params()) {
    throw ShapeError("mlp: expected " + std::to_string(spec.num_params()) +
                     " parameters, got " + std::to_string(x.size()));
  }
  const auto shapes = spec.shapes();
  std::vector<ad::Var> vars = ad::register_parameters(tape, x, shapes);
  MlpParams p;
  for (std::size_t i = 0; i < vars.size(); i += 2) {
    p.weights.push_back(vars[i]);
    p.biases.push_back(vars[i + 1]);
  }
  return p;
}

/// Logits (B x out) for inputs (B x in). Hidden layers apply the activation,
/// the output layer is affine.
inline ad::Var mlp_forward(const MlpSpec& spec, const MlpParams& params, ad::Var inputs) {
  if (inputs.cols() != spec.widths.front()) {
    throw ShapeError("mlp_forward: input width " + std::to_string(inputs.cols()) +
                     " does not match layer 0 width " + std::to_string(spec.widths.front()));
  }
  ad::Tape& tape = *inputs.tape();
  const ad::Var ones = tape.constant(Matrix(inputs.rows(), 1, 1.0));
  ad::Var h = inputs;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    h = matmul(h, params.weights[l]) + matmul(ones, params.biases[l]);
    if (l + 1 < spec.num_layers()) {
      h = spec.activation == Activation::kTanh ? tanh(h) : relu(h);
    }
  }
  return h;
}

/// Per-sample binary cross-entropy from logits z (B x 1):
///   max(z, 0) - z * y + log(1 + exp(-|z|))
inline ad::Var binary_cross_entropy(ad::Var logits, std::span<const double> labels) {
  if (logits.cols() != 1 || logits.rows() != labels.size()) {
    throw ShapeError("binary_cross_entropy: logits " + logits.value().shape_string() +
                     " vs " + std::to_string(labels.size()) + " labels");
  }
  ad::Tape& tape = *logits.tape();
  const ad::Var y = tape.constant(Matrix::column(labels));
  return relu(logits) - logits * y + log(exp(-abs(logits)) + 1.0);
}

/// Per-sample multiclass cross-entropy from logits (B x C) and integer
/// labels in [0, C). The row max is subtracted as a constant.
inline ad::Var multiclass_cross_entropy(ad::Var logits, std::span<const double> labels) {
  const Matrix& z = logits.value();
  if (z.rows != labels.size()) {
    throw ShapeError("multiclass_cross_entropy: logits " + z.shape_string() + " vs " +
                     std::to_string(labels.size()) + " labels");
  }
  ad::Tape& tape = *logits.tape();
  Matrix shift(z.rows, z.cols), onehot(z.rows, z.cols);
  for (std::size_t i = 0; i < z.rows; ++i) {
    double mx = z(i, 0);
    for (std::size_t c = 1; c < z.cols; ++c) mx = std::max(mx, z(i, c));
    for (std::size_t c = 0; c < z.cols; ++c) shift(i, c) = mx;
    const auto k = static_cast<std::size_t>(labels[i]);
    if (k >= z.cols) {
      throw ShapeError("multiclass_cross_entropy: label " + std::to_string(k) + " out of range");
    }
    onehot(i, k) = 1.0;
  }
  const ad::Var ones = tape.constant(Matrix(z.cols, 1, 1.0));
  const ad::Var centered = logits - tape.constant(std::move(shift));
  const ad::Var lse = log(matmul(exp(centered), ones));
  const ad::Var picked = matmul(centered * tape.constant(std::move(onehot)), ones);
  return lse - picked;
}

/// Per-sample predicted probability of the positive class.
inline ad::Var positive_rate(ad::Var logits) { return sigmoid(logits); }

/// Per-sample soft accuracy y * s + (1 - y) * (1 - s), s = sigmoid(z).
inline ad::Var soft_accuracy(ad::Var logits, std::span<const double> labels) {
  ad::Tape& tape = *logits.tape();
  const ad::Var y = tape.constant(Matrix::column(labels));
  const ad::Var s = sigmoid(logits);
  return y * s + (1.0 - y) * (1.0 - s);
}

}  // namespace spbm::problems
