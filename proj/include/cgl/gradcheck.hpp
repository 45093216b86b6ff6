// Copyright 2026 The cgl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cgl/autograd.hpp"
#include "cgl/nn.hpp"

namespace cgl {

struct GradcheckOptions {
  double step = 1e-4;
  double tolerance = 1e-3;
  /// Relative errors use max(|analytic|, |numeric|, abs_floor) as denominator.
  double abs_floor = 1e-6;
  /// 0 checks every entry; otherwise a seeded random subset per parameter.
  std::size_t max_entries_per_parameter = 0;
  std::uint64_t seed = 0;
  /// Fault injection for negative controls: scales the analytic gradient of
  /// the first parameter before comparison.
  double corrupt_first = 1.0;
};

struct GradcheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // finite differences crossed an activation kink
  bool passed = true;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  double tolerance = 0.0;

  bool passed() const;
  double max_rel_error() const;
  std::vector<std::string> failing() const;
};

/// Compares reverse-mode gradients of a scalar `forward` against central
/// differences for every parameter entry. `forward` must be deterministic
/// (normalization layers in eval mode).
GradcheckReport gradcheck(const std::function<Var()>& forward,
                          std::span<Parameter* const> params, const GradcheckOptions& options = {});

}  // namespace cgl
