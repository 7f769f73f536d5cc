#include "gpio/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "gpio/errors.hpp"

namespace gpio {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> values) : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != r * c) {
    throw ShapeError("matrix data length " + std::to_string(data.size()) + " does not match " + std::to_string(r) +
                     "x" + std::to_string(c));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::string Matrix::shape_string() const { return std::to_string(rows) + "x" + std::to_string(cols); }

Matrix concat_columns(const Matrix& left, const Matrix& right) {
  if (left.rows != right.rows) {
    throw ShapeError("concat_columns: row counts differ " + left.shape_string() + " vs " + right.shape_string());
  }
  Matrix out(left.rows, left.cols + right.cols);
  for (std::size_t r = 0; r < left.rows; ++r) {
    std::copy(left.row(r).begin(), left.row(r).end(), out.row(r).begin());
    std::copy(right.row(r).begin(), right.row(r).end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(left.cols));
  }
  return out;
}

// Row i of the input lands at row perm[i] of the output.
Matrix permute_rows(const Matrix& m, std::span<const std::size_t> perm) {
  if (perm.size() != m.rows) throw ShapeError("permute_rows: permutation length does not match row count");
  Matrix out(m.rows, m.cols);
  for (std::size_t i = 0; i < m.rows; ++i) std::copy(m.row(i).begin(), m.row(i).end(), out.row(perm[i]).begin());
  return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) {
    throw ShapeError("max_abs_diff: shapes differ " + a.shape_string() + " vs " + b.shape_string());
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) worst = std::max(worst, std::abs(a.data[i] - b.data[i]));
  return worst;
}

}  // namespace gpio
