#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace spbm {

/// Dense row-major matrix of doubles. Scalars are 1x1 matrices.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> values)
      : rows(r), cols(c), data(std::move(values)) {
    assert(data.size() == r * c);
  }

  static Matrix scalar(double v) { return Matrix(1, 1, v); }
  static Matrix column(std::span<const double> v) {
    return Matrix(v.size(), 1, std::vector<double>(v.begin(), v.end()));
  }
  static Matrix row(std::span<const double> v) {
    return Matrix(1, v.size(), std::vector<double>(v.begin(), v.end()));
  }
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rs) {
    Matrix m;
    m.rows = rs.size();
    m.cols = rs.size() ? rs.begin()->size() : 0;
    for (const auto& r : rs) {
      assert(r.size() == m.cols);
      m.data.insert(m.data.end(), r.begin(), r.end());
    }
    return m;
  }

  std::size_t size() const noexcept { return data.size(); }
  bool is_scalar() const noexcept { return rows == 1 && cols == 1; }

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  /// Value of a 1x1 matrix.
  double item() const {
    assert(is_scalar());
    return data[0];
  }

  bool same_shape(const Matrix& o) const noexcept {
    return rows == o.rows && cols == o.cols;
  }

  std::string shape_string() const {
    return std::to_string(rows) + "x" + std::to_string(cols);
  }
};

/// out += a * b, with out sized rows(a) x cols(b). i-k-j loop order.
inline void matmul_accumulate(const Matrix& a, const Matrix& b, Matrix& out) {
  const std::size_t n = a.rows, k = a.cols, m = b.cols;
  for (std::size_t i = 0; i < n; ++i) {
    double* orow = out.data.data() + i * m;
    const double* arow = a.data.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = arow[p];
      const double* brow = b.data.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += aip * brow[j];
    }
  }
}

/// out += a^T * b.
inline void matmul_at_b_accumulate(const Matrix& a, const Matrix& b, Matrix& out) {
  const std::size_t n = a.rows, k = a.cols, m = b.cols;
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.data.data() + i * k;
    const double* brow = b.data.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = arow[p];
      double* orow = out.data.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += aip * brow[j];
    }
  }
}

/// out += a * b^T.
inline void matmul_a_bt_accumulate(const Matrix& a, const Matrix& b, Matrix& out) {
  const std::size_t n = a.rows, k = a.cols, m = b.rows;
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.data.data() + i * k;
    double* orow = out.data.data() + i * m;
    for (std::size_t j = 0; j < m; ++j) {
      const double* brow = b.data.data() + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      orow[j] += acc;
    }
  }
}

}  // namespace spbm
