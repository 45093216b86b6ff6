// Copyright 2026 The cgl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unistd.h>
#include <vector>

#include "cgl/rng.hpp"
#include "cgl/tensor.hpp"

namespace cgl::testing {

inline constexpr std::uint64_t kPropertySeeds = 20;

inline Tensor random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  Tensor t({rows, cols});
  for (double& v : t.values()) v = scale * rng.normal();
  return t;
}

inline Tensor random_binary_graph(std::size_t n, double p, Rng& rng) {
  Tensor a({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    a.at(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = rng.uniform() < p ? 1.0 : 0.0;
      a.at(i, j) = v;
      a.at(j, i) = v;
    }
  }
  return a;
}

// Reference triple loop, independent of the blocked kernels.
inline Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  Tensor c({a.rows(), b.cols()});
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      long double s = 0.0L;
      for (std::size_t p = 0; p < a.cols(); ++p) s += static_cast<long double>(a.at(i, p)) * b.at(p, j);
      c.at(i, j) = static_cast<double>(s);
    }
  }
  return c;
}

inline double cosine(std::span<const double> a, std::span<const double> b) {
  long double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<long double>(a[i]) * b[i];
    na += static_cast<long double>(a[i]) * a[i];
    nb += static_cast<long double>(b[i]) * b[i];
  }
  return static_cast<double>(dot / std::sqrt(na * nb));
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("cgl_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace cgl::testing
