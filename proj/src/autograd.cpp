// Copyright 2026 The cgl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgl/autograd.hpp"

#include <unordered_set>
#include <utility>

#include "cgl/error.hpp"

namespace cgl {

namespace detail {

Tensor& grad_slot(Node& node) {
  if (node.grad.empty()) node.grad = Tensor(node.value.shape());
  return node.grad;
}

void accumulate(Node& node, const Tensor& delta) {
  if (!node.requires_grad) return;
  if (delta.shape() != node.value.shape()) {
    throw DimensionError("gradient shape " + shape_string(delta.shape()) +
                         " does not match value shape " + shape_string(node.value.shape()));
  }
  if (node.grad.empty()) {
    node.grad = delta;
    return;
  }
  double* g = node.grad.data();
  const double* d = delta.data();
  for (std::size_t i = 0; i < delta.size(); ++i) g[i] += d[i];
}

}  // namespace detail

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<detail::Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

void Var::zero_grad() {
  if (node_) node_->grad = Tensor();
}

Var Var::from_op(std::string_view op, Tensor value, std::initializer_list<Var> inputs,
                 std::function<void(detail::Node&)> backward) {
  value.check_finite(op);
  Var out(std::move(value), false);
  for (const Var& in : inputs) {
    if (in.requires_grad()) {
      out.node_->requires_grad = true;
      break;
    }
  }
  if (out.node_->requires_grad) {
    out.node_->inputs.reserve(inputs.size());
    for (const Var& in : inputs) out.node_->inputs.push_back(in.node_);
    out.node_->backward = std::move(backward);
  }
  return out;
}

void Var::backward() {
  if (value().size() != 1) {
    throw DimensionError("backward() without a seed needs a single-element output, got " +
                         shape_string(shape()));
  }
  backward(Tensor(shape(), 1.0));
}

void Var::backward(const Tensor& seed) {
  if (!requires_grad()) throw ValidationError("backward() on a value that does not require grad");

  // Iterative post-order DFS; reversed it is a topological order from the root.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child && child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  detail::accumulate(*node_, seed);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
}

namespace {
thread_local KinkProbe* active_probe = nullptr;
}

KinkProbe::KinkProbe() : previous_(active_probe) { active_probe = this; }

KinkProbe::~KinkProbe() { active_probe = previous_; }

void KinkProbe::record(std::span<const double> pre_activation) {
  KinkProbe* probe = active_probe;
  if (!probe) return;
  std::uint64_t hash = probe->hash_;
  for (double v : pre_activation) {
    hash ^= (v >= 0.0) ? 0x9eu : 0x3bu;
    hash *= 1099511628211ull;
  }
  probe->hash_ = hash;
}

}  // namespace cgl
