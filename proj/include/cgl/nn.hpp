// Copyright 2026 The cgl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cgl/autograd.hpp"
#include "cgl/rng.hpp"
#include "cgl/tensor.hpp"

namespace cgl {

enum class Mode { kTrain, kEval };

/// A trainable leaf with a unique dotted name such as "fusion.linear.weight".
struct Parameter {
  std::string name;
  Var var;

  Parameter() = default;
  Parameter(std::string n, Tensor value) : name(std::move(n)), var(std::move(value), true) {}
};

/// Non-trainable state that still belongs in checkpoints (normalization statistics).
struct BufferRef {
  std::string name;
  Tensor* tensor;
};

/// Anything owning parameters and buffers.
class Module {
 public:
  virtual ~Module() = default;
  virtual void collect_parameters(std::vector<Parameter*>& out) = 0;
  virtual void collect_buffers(std::vector<BufferRef>& out) = 0;
  virtual void set_mode(Mode mode) = 0;

  std::vector<Parameter*> parameters();
  std::vector<BufferRef> buffers();
};

/// Fully connected layer. Weights are uniform in +-sqrt(1/fan_in), biases start at zero.
class Linear final : public Module {
 public:
  Linear(const std::string& name, std::size_t in, std::size_t out, bool with_bias, Rng& rng);

  Var forward(const Var& input) const;

  std::size_t in_features() const { return weight.var.value().rows(); }
  std::size_t out_features() const { return weight.var.value().cols(); }

  void collect_parameters(std::vector<Parameter*>& out) override;
  void collect_buffers(std::vector<BufferRef>&) override {}
  void set_mode(Mode) override {}

  Parameter weight;  // [in x out]
  Parameter bias;    // [out]; var undefined when the layer has no bias
};

/// Per-feature batch normalization with running statistics.
struct BatchNormState {
  Parameter gamma;
  Parameter beta;
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double eps = 1e-5;
  Mode mode = Mode::kTrain;

  BatchNormState(const std::string& name, std::size_t features, double momentum = 0.1,
                 double eps = 1e-5);
  std::size_t features() const { return running_mean.size(); }
};

/// Train mode: normalizes by the biased batch statistics and blends the unbiased
/// batch variance into the running estimates. Eval mode: running statistics only.
Var batch_norm(const Var& input, BatchNormState& state);

class BatchNorm final : public Module {
 public:
  BatchNorm(const std::string& name, std::size_t features) : state(name, features) {}

  Var forward(const Var& input) { return batch_norm(input, state); }

  void collect_parameters(std::vector<Parameter*>& out) override;
  void collect_buffers(std::vector<BufferRef>& out) override;
  void set_mode(Mode mode) override { state.mode = mode; }

  BatchNormState state;
};

}  // namespace cgl
