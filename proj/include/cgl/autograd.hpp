// Copyright 2026 The cgl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "cgl/tensor.hpp"

namespace cgl {

namespace detail {

/// One vertex of the dynamically recorded computation graph.
struct Node {
  Tensor value;
  Tensor grad;  // empty until the first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads `grad` of the node it is attached to and accumulates into inputs.
  std::function<void(Node&)> backward;
};

/// Adds `delta` into the node's gradient, allocating it on first use.
void accumulate(Node& node, const Tensor& delta);
/// Zero-initialised gradient slot of the node, allocated on first use.
Tensor& grad_slot(Node& node);

}  // namespace detail

/// Differentiable handle onto a tensor.
///
/// Copies share the underlying node. Leaves created with requires_grad
/// collect gradients across backward passes until zero_grad().
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  /// Direct write access, meant for leaves (optimizer updates, finite differences).
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  bool has_grad() const { return node_ && !node_->grad.empty(); }
  const Tensor& grad() const { return node_->grad; }
  Tensor& mutable_grad() { return detail::grad_slot(*node_); }
  void zero_grad();

  /// Reverse sweep from a single-element output, seeded with 1.
  void backward();
  void backward(const Tensor& seed);

  /// Result of a differentiable op. The backward closure is only kept when at
  /// least one input requires a gradient. `op` names the op in finiteness errors.
  static Var from_op(std::string_view op, Tensor value, std::initializer_list<Var> inputs,
                     std::function<void(detail::Node&)> backward);

  detail::Node& node() { return *node_; }
  const detail::Node& node() const { return *node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Records the on/off pattern of piecewise-linear activations while in scope.
///
/// Finite differences straddling a kink are meaningless; gradcheck compares the
/// signature of perturbed and unperturbed forwards and skips entries whose
/// activation pattern changed.
class KinkProbe {
 public:
  KinkProbe();
  ~KinkProbe();
  KinkProbe(const KinkProbe&) = delete;
  KinkProbe& operator=(const KinkProbe&) = delete;

  std::uint64_t signature() const noexcept { return hash_; }

  /// Called by activation ops; no-op when no probe is active on this thread.
  static void record(std::span<const double> pre_activation);

 private:
  KinkProbe* previous_;
  std::uint64_t hash_ = 1469598103934665603ull;
};

}  // namespace cgl
