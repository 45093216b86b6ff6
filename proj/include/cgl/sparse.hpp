// Copyright 2026 The cgl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "cgl/tensor.hpp"

namespace cgl {

/// One stored entry of a sparse matrix in coordinate form.
struct CooEntry {
  std::size_t row;
  std::size_t col;
  double value;
};

/// Compressed-sparse-row matrix of doubles. Column indices are ascending within a row.
struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::size_t> col_index;
  std::vector<double> values;

  /// Keeps every nonzero entry of a dense matrix.
  static SparseMatrix from_dense(const Tensor& dense);
  /// Entries must be in row-major order.
  static SparseMatrix from_coo(std::size_t rows, std::size_t cols,
                               const std::vector<CooEntry>& entries);

  std::size_t nnz() const noexcept { return values.size(); }
  SparseMatrix transpose() const;
  Tensor to_dense() const;
  std::vector<CooEntry> to_coo() const;

  /// this * dense
  Tensor multiply(const Tensor& dense) const;

  bool operator==(const SparseMatrix&) const = default;
};

/// A constant sparse matrix paired with its transpose, shared by graph nodes
/// that multiply by it in the forward and backward sweeps.
class SparseOperator {
 public:
  explicit SparseOperator(SparseMatrix matrix)
      : matrix_(std::move(matrix)), transposed_(matrix_.transpose()) {}

  const SparseMatrix& matrix() const noexcept { return matrix_; }
  const SparseMatrix& transposed() const noexcept { return transposed_; }

 private:
  SparseMatrix matrix_;
  SparseMatrix transposed_;
};

}  // namespace cgl
