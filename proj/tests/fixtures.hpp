#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "spbm/problem.hpp"
#include "spbm/tape.hpp"

namespace spbm::test {

/// f = 1/2 sum_i a_i (x_i - c_i - xi_i)^2,
/// g_j = sin(w_j . x) + 1/2 x_{j mod n}^2 - b_j.
/// The batch is the per-coordinate shift xi.
class QuadraticProblem {
 public:
  using Batch = std::vector<double>;

  QuadraticProblem(std::size_t n, std::size_t m, std::uint64_t seed) : n_(n), m_(m) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      a_.push_back(0.5 + std::abs(u(rng)));
      c_.push_back(2.0 * u(rng));
    }
    for (std::size_t j = 0; j < m; ++j) {
      std::vector<double> w(n);
      for (double& v : w) v = u(rng);
      w_.push_back(std::move(w));
      b_.push_back(0.3 * u(rng));
    }
  }

  std::size_t dim() const { return n_; }
  std::size_t num_constraints() const { return m_; }

  Recorded record(ad::Tape& tape, std::span<const double> x, const Batch& xi) const {
    const ad::Var xv = tape.parameter(Matrix::column(x));
    const ad::Var target = tape.constant(shifted(xi));
    const ad::Var a = tape.constant(Matrix::column(a_));
    Recorded r{sum(a * square(xv - target)) * 0.5, {}};
    for (std::size_t j = 0; j < m_; ++j) {
      Matrix sel(1, n_, 0.0);
      sel.data[j % n_] = 1.0;
      const ad::Var xj = matmul(tape.constant(std::move(sel)), xv);
      const ad::Var wx = matmul(tape.constant(Matrix(1, n_, w_[j])), xv);
      r.constraints.push_back(sin(wx) + square(xj) * 0.5 - b_[j]);
    }
    return r;
  }

  Batch sample(std::mt19937_64& rng) const {
    std::normal_distribution<double> nd(0.0, 0.1);
    Batch b(n_);
    for (double& v : b) v = nd(rng);
    return b;
  }

 private:
  Matrix shifted(const Batch& xi) const {
    Matrix t(n_, 1);
    for (std::size_t i = 0; i < n_; ++i) t.data[i] = c_[i] + (xi.empty() ? 0.0 : xi[i]);
    return t;
  }

  std::size_t n_, m_;
  std::vector<double> a_, c_, b_;
  std::vector<std::vector<double>> w_;
};

/// Objective x^2, constraints with fixed values regardless of x (plus a tiny
/// x dependence so the gradient is well defined).
class ConstantConstraintProblem {
 public:
  using Batch = int;
  explicit ConstantConstraintProblem(std::vector<double> g) : g_(std::move(g)) {}
  std::size_t dim() const { return 1; }
  std::size_t num_constraints() const { return g_.size(); }
  Recorded record(ad::Tape& tape, std::span<const double> x, const Batch&) const {
    const ad::Var xv = tape.parameter(x[0]);
    Recorded r{square(xv), {}};
    for (double g : g_) r.constraints.push_back(xv * 0.0 + g);
    return r;
  }

 private:
  std::vector<double> g_;
};

}  // namespace spbm::test
