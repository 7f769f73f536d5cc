#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gpio/matrix.hpp"

namespace gpio {

/// Compressed sparse row matrix. Column indices are sorted within each row.
struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr;
  std::vector<std::uint32_t> col_idx;
  std::vector<double> values;

  std::size_t nnz() const { return values.size(); }
  double at(std::size_t r, std::size_t c) const;

  Matrix multiply(const Matrix& x) const;
  std::vector<double> multiply(std::span<const double> x) const;
  SparseMatrix transpose() const;
  Matrix to_dense() const;
};

}  // namespace gpio
