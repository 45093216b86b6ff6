// Copyright 2026 The cgl Authors
// SPDX-License-Identifier: Apache-2.0

#include "linalg.hpp"

#include <algorithm>
#include <vector>

namespace cgl::linalg {

namespace {

constexpr std::size_t kRowBlock = 4;

using v8d = double __attribute__((vector_size(64)));

inline v8d load8(const double* p) {
  v8d v;
  __builtin_memcpy(&v, p, sizeof(v));
  return v;
}

inline void store8(double* p, v8d v) { __builtin_memcpy(p, &v, sizeof(v)); }

// Four output rows share each loaded row of b. Column tiles of W x 8 stay in
// registers across the whole inner loop; every c entry still receives its
// c + a * b updates in ascending p order, whichever tile path it takes.
template <std::size_t W>
inline void tile(const double* __restrict a, const double* __restrict b, double* __restrict c,
                 std::size_t k, std::size_t n, std::size_t j0) {
  v8d acc[kRowBlock][W];
  for (std::size_t r = 0; r < kRowBlock; ++r) {
    for (std::size_t w = 0; w < W; ++w) acc[r][w] = load8(c + r * n + j0 + 8 * w);
  }
  for (std::size_t p = 0; p < k; ++p) {
    const double* brow = b + p * n + j0;
    v8d bv[W];
    for (std::size_t w = 0; w < W; ++w) bv[w] = load8(brow + 8 * w);
    for (std::size_t r = 0; r < kRowBlock; ++r) {
      const double ar = a[r * k + p];
      for (std::size_t w = 0; w < W; ++w) acc[r][w] += ar * bv[w];
    }
  }
  for (std::size_t r = 0; r < kRowBlock; ++r) {
    for (std::size_t w = 0; w < W; ++w) store8(c + r * n + j0 + 8 * w, acc[r][w]);
  }
}

inline void tail(const double* __restrict a, const double* __restrict b, double* __restrict c,
                 std::size_t k, std::size_t n, std::size_t j0) {
  for (std::size_t r = 0; r < kRowBlock; ++r) {
    for (std::size_t j = j0; j < n; ++j) {
      double acc = c[r * n + j];
      for (std::size_t p = 0; p < k; ++p) acc += a[r * k + p] * b[p * n + j];
      c[r * n + j] = acc;
    }
  }
}

inline void row_block(const double* __restrict a, const double* __restrict b, double* __restrict c,
                      std::size_t k, std::size_t n) {
  std::size_t j0 = 0;
  for (; j0 + 32 <= n; j0 += 32) tile<4>(a, b, c, k, n, j0);
  for (; j0 + 8 <= n; j0 += 8) tile<1>(a, b, c, k, n, j0);
  if (j0 < n) tail(a, b, c, k, n, j0);
}

}  // namespace

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, 0.0);
  const std::size_t full = m - m % kRowBlock;
  for (std::size_t i = 0; i < full; i += kRowBlock) row_block(a + i * k, b, c + i * n, k, n);
  if (full == m) return;
  // Leftover rows go through the same block kernel on zero-padded copies.
  const std::size_t rest = m - full;
  std::vector<double> pa(kRowBlock * k, 0.0);
  std::vector<double> pc(kRowBlock * n, 0.0);
  std::copy(a + full * k, a + m * k, pa.begin());
  std::copy(c + full * n, c + m * n, pc.begin());
  row_block(pa.data(), b, pc.data(), k, n);
  std::copy(pc.begin(), pc.begin() + rest * n, c + full * n);
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  std::vector<double> at(m * k);
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t i = 0; i < m; ++i) at[i * k + p] = a[p * m + i];
  }
  gemm_nn(at.data(), b, c, m, k, n, accumulate);
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  std::vector<double> bt(k * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  }
  gemm_nn(a, bt.data(), c, m, k, n, accumulate);
}

}  // namespace cgl::linalg
