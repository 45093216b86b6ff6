// Copyright 2026 The cgl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "cgl/autograd.hpp"
#include "cgl/composer.hpp"
#include "cgl/graph.hpp"
#include "cgl/nn.hpp"
#include "cgl/sparse.hpp"

namespace cgl {

/// lambda_hat * h * w, followed by ReLU when `activate` is set.
Var gcn_layer(const std::shared_ptr<const SparseOperator>& lambda_hat, const Var& h, const Var& w,
              bool activate);

/// Bias-free graph convolutions, ReLU between layers and none after the last.
class GcnStack final : public Module {
 public:
  GcnStack(std::size_t in, std::size_t hidden, std::size_t out, std::size_t depth, Rng& rng);

  Var forward(const std::shared_ptr<const SparseOperator>& lambda_hat, const Var& h) const;
  std::size_t depth() const { return layers_.size(); }
  std::vector<Linear>& layers() { return layers_; }

  void collect_parameters(std::vector<Parameter*>& out) override;
  void collect_buffers(std::vector<BufferRef>&) override {}
  void set_mode(Mode) override {}

 private:
  std::vector<Linear> layers_;
};

/// Source of the [N x D_V] projection that turns composed queries into node logits.
class NodeProjection : public Module {
 public:
  virtual Var forward() = 0;
};

/// The auxiliary branch: its own composer over the node features of the graph,
/// followed by the GCN stack, producing one D_V row per node.
class GcnStream final : public NodeProjection {
 public:
  /// `hidden` = 0 uses D_V.
  GcnStream(const GraphBundle& bundle, std::unique_ptr<Composer> composer, Rng& rng,
            std::size_t depth = 2, std::size_t hidden = 0);

  /// Recomputed on every call; [N x D_V].
  Var forward() override;

  Composer& composer() { return *composer_; }
  GcnStack& stack() { return stack_; }
  const Tensor& image_part() const { return image_part_.value(); }
  const Tensor& text_part() const { return text_part_.value(); }
  const SparseMatrix& lambda_prime() const { return lambda_prime_; }
  std::size_t nodes() const { return image_part_.value().rows(); }

  void collect_parameters(std::vector<Parameter*>& out) override;
  void collect_buffers(std::vector<BufferRef>& out) override;
  void set_mode(Mode mode) override { composer_->set_mode(mode); }

 private:
  std::unique_ptr<Composer> composer_;
  std::shared_ptr<const SparseOperator> lambda_hat_;
  SparseMatrix lambda_prime_;
  Var image_part_;
  Var text_part_;
  GcnStack stack_;
};

/// A bare trainable [N x D_V] matrix in place of the graph branch.
class LinearHead final : public NodeProjection {
 public:
  LinearHead(std::size_t nodes, std::size_t width, Rng& rng);
  Var forward() override { return weight_.var; }
  void collect_parameters(std::vector<Parameter*>& out) override { out.push_back(&weight_); }
  void collect_buffers(std::vector<BufferRef>&) override {}
  void set_mode(Mode) override {}

 private:
  Parameter weight_;
};

/// main_out[B x D] * w_out[N x D]^T
Var node_logits(const Var& main_out, const Var& w_out);

/// Rows of the binarized matrix selected by the batch keys: [B x N] of {0, 1}.
Tensor pseudo_labels(const SparseMatrix& lambda_prime, std::span<const std::size_t> keys);

}  // namespace cgl
