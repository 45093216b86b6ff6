// Copyright 2026 The cgl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>

#include "cgl/nn.hpp"

namespace cgl {

/// p <- p - lr * grad for every parameter, then clears the gradients.
/// A parameter without a gradient is a contract violation (ValidationError).
void sgd_step(std::span<Parameter* const> params, double lr);

void zero_grad(std::span<Parameter* const> params);

/// Step decay: base * factor^floor(epoch / step_size), epoch counted from 0.
double step_lr(double base, std::size_t epoch, std::size_t step_size = 10,
               double factor = 0.70710678118654752440);

}  // namespace cgl
