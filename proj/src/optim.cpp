// Copyright 2026 The cgl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgl/optim.hpp"

#include <cmath>

#include "cgl/error.hpp"

namespace cgl {

void sgd_step(std::span<Parameter* const> params, double lr) {
  for (Parameter* p : params) {
    if (!p->var.has_grad()) throw ValidationError("sgd_step: parameter '" + p->name + "' has no gradient");
  }
  for (Parameter* p : params) {
    Tensor& value = p->var.mutable_value();
    const Tensor& grad = p->var.grad();
    for (std::size_t i = 0; i < value.size(); ++i) value[i] -= lr * grad[i];
    p->var.zero_grad();
  }
}

void zero_grad(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->var.zero_grad();
}

double step_lr(double base, std::size_t epoch, std::size_t step_size, double factor) {
  return base * std::pow(factor, static_cast<double>(epoch / step_size));
}

}  // namespace cgl
