// Copyright 2026 The cgl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <memory>
#include <span>

#include "cgl/autograd.hpp"
#include "cgl/sparse.hpp"
#include "cgl/tensor.hpp"

namespace cgl {

// Differentiable operations. Matrices are batch-major: rows are samples.

/// input[B x Din] * weight[Din x Dout] (+ bias[Dout]).
Var affine(const Var& input, const Var& weight);
Var affine(const Var& input, const Var& weight, const Var& bias);

Var matmul(const Var& a, const Var& b);
/// a[M x K] * b[N x K]^T
Var matmul_transposed(const Var& a, const Var& b);
/// Constant sparse left factor: lhs[M x K] * x[K x D].
Var sparse_matmul(std::shared_ptr<const SparseOperator> lhs, const Var& x);

Var add(const Var& a, const Var& b);
/// Elementwise product.
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
/// `factor` is a single-element tensor (e.g. a learnable scalar weight).
Var scale_by(const Var& a, const Var& factor);
/// (1 - gate) * a + gate * b, elementwise.
Var interpolate(const Var& a, const Var& b, const Var& gate);

/// x for x >= 0, slope * x otherwise; the derivative at 0 is `slope`.
Var leaky_relu(const Var& input, double slope);
inline Var relu(const Var& input) { return leaky_relu(input, 0.0); }
Var sigmoid(const Var& input);

/// Columns of `a` followed by the columns of `b`.
Var concat_features(const Var& a, const Var& b);

/// Divides each row by its Euclidean norm. A zero row is a NumericalError.
Var l2_normalize_rows(const Var& input);

/// Mean over rows of -log softmax(logits_i)[target_index_i].
Var softmax_cross_entropy_rows(const Var& logits, std::span<const std::size_t> target_index);

/// Mean elementwise binary cross-entropy on logits; targets must be 0 or 1.
Var bce_with_logits(const Var& logits, const Tensor& targets);

/// sum(input * weights): a scalar probe used to turn any output into a loss.
Var weighted_sum(const Var& input, const Tensor& weights);

/// Numerically stable logistic function on plain doubles.
double stable_sigmoid(double x);

}  // namespace cgl
