#include "gpio/sparse.hpp"

#include <algorithm>

#include "gpio/errors.hpp"

namespace gpio {

double SparseMatrix::at(std::size_t r, std::size_t c) const {
  auto begin = col_idx.begin() + static_cast<std::ptrdiff_t>(row_ptr[r]);
  auto end = col_idx.begin() + static_cast<std::ptrdiff_t>(row_ptr[r + 1]);
  auto it = std::lower_bound(begin, end, static_cast<std::uint32_t>(c));
  if (it == end || *it != c) return 0.0;
  return values[static_cast<std::size_t>(it - col_idx.begin())];
}

Matrix SparseMatrix::multiply(const Matrix& x) const {
  if (x.rows != cols) {
    throw ShapeError("sparse multiply: operator " + std::to_string(rows) + "x" + std::to_string(cols) +
                     " cannot act on " + x.shape_string());
  }
  Matrix out(rows, x.cols);
  for (std::size_t r = 0; r < rows; ++r) {
    auto dst = out.row(r);
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
      const double w = values[k];
      auto src = x.row(col_idx[k]);
      for (std::size_t c = 0; c < x.cols; ++c) dst[c] += w * src[c];
    }
  }
  return out;
}

std::vector<double> SparseMatrix::multiply(std::span<const double> x) const {
  if (x.size() != cols) throw ShapeError("sparse multiply: vector length does not match operator columns");
  std::vector<double> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) out[r] += values[k] * x[col_idx[k]];
  return out;
}

SparseMatrix SparseMatrix::transpose() const {
  SparseMatrix t;
  t.rows = cols;
  t.cols = rows;
  t.row_ptr.assign(cols + 1, 0);
  for (auto c : col_idx) ++t.row_ptr[c + 1];
  for (std::size_t i = 0; i < cols; ++i) t.row_ptr[i + 1] += t.row_ptr[i];
  t.col_idx.resize(nnz());
  t.values.resize(nnz());
  std::vector<std::size_t> fill(t.row_ptr.begin(), t.row_ptr.end() - 1);
  // Rows are visited in increasing order, so each transposed row stays sorted.
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
      const auto dst = fill[col_idx[k]]++;
      t.col_idx[dst] = static_cast<std::uint32_t>(r);
      t.values[dst] = values[k];
    }
  return t;
}

Matrix SparseMatrix::to_dense() const {
  Matrix out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) out(r, col_idx[k]) = values[k];
  return out;
}

}  // namespace gpio
