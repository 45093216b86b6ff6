// Copyright 2026 The cgl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "cgl/gradcheck.hpp"
#include "cgl/trainer.hpp"

namespace cgl {

/// Small, randomized problem sizes for finite-difference checks.
struct CheckSizes {
  std::size_t d_v = 8;
  std::size_t d_t = 4;
  std::size_t batch = 4;
  std::size_t nodes = 6;
};

/// Gradcheck of a composer built from `spec` (dimensions overridden by `sizes`)
/// on a random batch. Normalization statistics are first warmed up in train
/// mode, affine parameters randomized, then everything is checked in eval mode.
GradcheckReport composer_gradcheck(const std::string& kind, char variant, std::uint64_t seed,
                                   const GradcheckOptions& options = {}, const CheckSizes& sizes = {});

/// Gradcheck of the two-layer GCN stack (weights and node features) over a
/// random graph produced by the full construction pipeline.
GradcheckReport gcn_gradcheck(std::uint64_t seed, const GradcheckOptions& options = {},
                              const CheckSizes& sizes = {});

}  // namespace cgl
