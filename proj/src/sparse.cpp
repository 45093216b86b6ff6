// Copyright 2026 The cgl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgl/sparse.hpp"

#include "cgl/error.hpp"

namespace cgl {

SparseMatrix SparseMatrix::from_dense(const Tensor& dense) {
  SparseMatrix m;
  m.rows = dense.rows();
  m.cols = dense.cols();
  m.row_ptr.assign(1, 0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) {
      const double v = dense.at(r, c);
      if (v != 0.0) {
        m.col_index.push_back(c);
        m.values.push_back(v);
      }
    }
    m.row_ptr.push_back(m.values.size());
  }
  return m;
}

SparseMatrix SparseMatrix::from_coo(std::size_t rows, std::size_t cols,
                                    const std::vector<CooEntry>& entries) {
  SparseMatrix m;
  m.rows = rows;
  m.cols = cols;
  m.row_ptr.assign(rows + 1, 0);
  m.col_index.reserve(entries.size());
  m.values.reserve(entries.size());
  std::size_t prev_row = 0;
  std::size_t prev_col = 0;
  bool first = true;
  for (const CooEntry& e : entries) {
    if (e.row >= rows || e.col >= cols) throw ValidationError("COO entry out of range");
    if (!first && (e.row < prev_row || (e.row == prev_row && e.col <= prev_col))) {
      throw ValidationError("COO entries must be strictly row-major ordered");
    }
    first = false;
    prev_row = e.row;
    prev_col = e.col;
    ++m.row_ptr[e.row + 1];
    m.col_index.push_back(e.col);
    m.values.push_back(e.value);
  }
  for (std::size_t r = 0; r < rows; ++r) m.row_ptr[r + 1] += m.row_ptr[r];
  return m;
}

SparseMatrix SparseMatrix::transpose() const {
  SparseMatrix t;
  t.rows = cols;
  t.cols = rows;
  t.row_ptr.assign(cols + 1, 0);
  for (std::size_t c : col_index) ++t.row_ptr[c + 1];
  for (std::size_t c = 0; c < cols; ++c) t.row_ptr[c + 1] += t.row_ptr[c];
  t.col_index.resize(nnz());
  t.values.resize(nnz());
  std::vector<std::size_t> cursor(t.row_ptr.begin(), t.row_ptr.end() - 1);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
      const std::size_t slot = cursor[col_index[k]]++;
      t.col_index[slot] = r;
      t.values[slot] = values[k];
    }
  }
  return t;
}

Tensor SparseMatrix::to_dense() const {
  Tensor dense({rows, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) dense.at(r, col_index[k]) = values[k];
  }
  return dense;
}

std::vector<CooEntry> SparseMatrix::to_coo() const {
  std::vector<CooEntry> out;
  out.reserve(nnz());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) out.push_back({r, col_index[k], values[k]});
  }
  return out;
}

namespace {

using v8d = double __attribute__((vector_size(64)));

// Whole output row held in registers; same per-entry update order as the generic loop.
template <std::size_t W>
void multiply_rows(const SparseMatrix& m, const double* dense, double* out) {
  constexpr std::size_t width = 8 * W;
  for (std::size_t r = 0; r < m.rows; ++r) {
    v8d acc[W] = {};
    for (std::size_t k = m.row_ptr[r]; k < m.row_ptr[r + 1]; ++k) {
      const double w = m.values[k];
      const double* src = dense + m.col_index[k] * width;
      for (std::size_t i = 0; i < W; ++i) {
        v8d v;
        __builtin_memcpy(&v, src + 8 * i, sizeof(v));
        acc[i] += w * v;
      }
    }
    __builtin_memcpy(out + r * width, acc, sizeof(acc));
  }
}

}  // namespace

Tensor SparseMatrix::multiply(const Tensor& dense) const {
  if (dense.rows() != cols) {
    throw DimensionError("sparse " + std::to_string(rows) + "x" + std::to_string(cols) +
                         " times " + shape_string(dense.shape()));
  }
  const std::size_t width = dense.cols();
  Tensor out({rows, width});
  switch (width) {
    case 64: multiply_rows<8>(*this, dense.data(), out.data()); break;
    case 32: multiply_rows<4>(*this, dense.data(), out.data()); break;
    case 16: multiply_rows<2>(*this, dense.data(), out.data()); break;
    case 8: multiply_rows<1>(*this, dense.data(), out.data()); break;
    default:
      for (std::size_t r = 0; r < rows; ++r) {
        double* __restrict dst = out.data() + r * width;
        for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
          const double w = values[k];
          const double* __restrict src = dense.data() + col_index[k] * width;
          for (std::size_t j = 0; j < width; ++j) dst[j] += w * src[j];
        }
      }
  }
  return out;
}

}  // namespace cgl
