// Copyright 2026 The cgl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgl/gcn.hpp"

#include <cmath>

#include "cgl/error.hpp"
#include "cgl/ops.hpp"

namespace cgl {

Var gcn_layer(const std::shared_ptr<const SparseOperator>& lambda_hat, const Var& h, const Var& w,
              bool activate) {
  const SparseMatrix& m = lambda_hat->matrix();
  if (h.value().rank() != 2 || m.cols != h.value().rows()) {
    throw DimensionError("graph has " + std::to_string(m.cols) + " nodes, features have shape " +
                         shape_string(h.value().shape()));
  }
  Var out = sparse_matmul(lambda_hat, matmul(h, w));
  return activate ? relu(out) : out;
}

GcnStack::GcnStack(std::size_t in, std::size_t hidden, std::size_t out, std::size_t depth, Rng& rng) {
  if (depth < 1) throw ValidationError("GCN needs at least one layer");
  layers_.reserve(depth);
  for (std::size_t l = 0; l < depth; ++l) {
    const std::size_t fan_in = l == 0 ? in : hidden;
    const std::size_t fan_out = l + 1 == depth ? out : hidden;
    layers_.emplace_back("gcn.layer" + std::to_string(l), fan_in, fan_out, false, rng);
  }
}

Var GcnStack::forward(const std::shared_ptr<const SparseOperator>& lambda_hat, const Var& h) const {
  Var x = h;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    x = gcn_layer(lambda_hat, x, layers_[l].weight.var, l + 1 < layers_.size());
  }
  return x;
}

void GcnStack::collect_parameters(std::vector<Parameter*>& out) {
  for (Linear& l : layers_) l.collect_parameters(out);
}

GcnStream::GcnStream(const GraphBundle& bundle, std::unique_ptr<Composer> composer, Rng& rng,
                     std::size_t depth, std::size_t hidden)
    : composer_(std::move(composer)),
      lambda_hat_(std::make_shared<SparseOperator>(bundle.lambda_hat)),
      lambda_prime_(bundle.lambda_prime),
      image_part_(slice_cols(bundle.node_features, 0, bundle.d_v)),
      text_part_(slice_cols(bundle.node_features, bundle.d_v, bundle.d_v + bundle.d_t)),
      stack_(bundle.d_v, hidden ? hidden : bundle.d_v, bundle.d_v, depth, rng) {
  if (composer_->image_dim() != bundle.d_v || composer_->text_dim() != bundle.d_t) {
    throw ValidationError("stream composer expects (" + std::to_string(composer_->image_dim()) + ", " +
                          std::to_string(composer_->text_dim()) + ") features, graph has (" +
                          std::to_string(bundle.d_v) + ", " + std::to_string(bundle.d_t) + ")");
  }
}

Var GcnStream::forward() {
  Var h = composer_->compose(image_part_, text_part_);
  return stack_.forward(lambda_hat_, h);
}

void GcnStream::collect_parameters(std::vector<Parameter*>& out) {
  composer_->collect_parameters(out);
  stack_.collect_parameters(out);
}

void GcnStream::collect_buffers(std::vector<BufferRef>& out) { composer_->collect_buffers(out); }

LinearHead::LinearHead(std::size_t nodes, std::size_t width, Rng& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(width));
  Tensor w({nodes, width});
  for (double& v : w.values()) v = rng.uniform(-bound, bound);
  weight_ = Parameter("linear_head.weight", std::move(w));
}

Var node_logits(const Var& main_out, const Var& w_out) {
  if (main_out.value().cols() != w_out.value().cols()) {
    throw DimensionError("node_logits width mismatch: " + shape_string(main_out.shape()) + " vs " +
                         shape_string(w_out.shape()));
  }
  return matmul_transposed(main_out, w_out);
}

Tensor pseudo_labels(const SparseMatrix& lambda_prime, std::span<const std::size_t> keys) {
  const std::size_t n = lambda_prime.cols;
  Tensor out({keys.size(), n});
  for (std::size_t b = 0; b < keys.size(); ++b) {
    const std::size_t k = keys[b];
    if (k >= lambda_prime.rows) {
      throw ValidationError("pseudo-label key " + std::to_string(k) + " outside graph of " +
                            std::to_string(lambda_prime.rows) + " nodes");
    }
    for (std::size_t p = lambda_prime.row_ptr[k]; p < lambda_prime.row_ptr[k + 1]; ++p) {
      out.at(b, lambda_prime.col_index[p]) = lambda_prime.values[p] != 0.0 ? 1.0 : 0.0;
    }
    out.at(b, k) = 1.0;
  }
  return out;
}

}  // namespace cgl
