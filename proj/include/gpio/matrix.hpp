#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace gpio {

/// Dense row-major matrix of doubles. Plain data container used for datasets,
/// encodings and exported results; the autodiff Tensor wraps the same layout.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> values);

  static Matrix identity(std::size_t n);

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool empty() const { return data.empty(); }
  std::string shape_string() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

Matrix concat_columns(const Matrix& left, const Matrix& right);
Matrix permute_rows(const Matrix& m, std::span<const std::size_t> perm);
double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace gpio
