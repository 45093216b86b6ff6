// Copyright 2026 The cgl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgl/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cgl/optim.hpp"
#include "cgl/rng.hpp"

namespace cgl {

bool GradcheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed; });
}

double GradcheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.max_rel_error);
  return worst;
}

std::vector<std::string> GradcheckReport::failing() const {
  std::vector<std::string> names;
  for (const auto& e : entries) {
    if (!e.passed) names.push_back(e.name);
  }
  return names;
}

namespace {

struct Evaluation {
  double loss;
  std::uint64_t kinks;
};

Evaluation evaluate(const std::function<Var()>& forward) {
  KinkProbe probe;
  Var loss = forward();
  return {loss.value()[0], probe.signature()};
}

}  // namespace

GradcheckReport gradcheck(const std::function<Var()>& forward, std::span<Parameter* const> params,
                          const GradcheckOptions& options) {
  GradcheckReport report;
  report.tolerance = options.tolerance;

  zero_grad(params);
  std::uint64_t base_kinks = 0;
  {
    KinkProbe probe;
    Var loss = forward();
    base_kinks = probe.signature();
    loss.backward();
  }
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) {
    analytic.push_back(p->var.has_grad() ? p->var.grad() : Tensor(p->var.value().shape()));
  }
  zero_grad(params);
  if (!analytic.empty() && options.corrupt_first != 1.0) {
    for (double& g : analytic.front().values()) g *= options.corrupt_first;
  }

  Rng rng(options.seed, "gradcheck");
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& param = *params[pi];
    Tensor& value = param.var.mutable_value();
    std::vector<std::size_t> indices(value.size());
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    if (options.max_entries_per_parameter && indices.size() > options.max_entries_per_parameter) {
      rng.shuffle(std::span<std::size_t>(indices));
      indices.resize(options.max_entries_per_parameter);
      std::sort(indices.begin(), indices.end());
    }

    GradcheckEntry entry{param.name};
    for (std::size_t idx : indices) {
      const double original = value[idx];
      value[idx] = original + options.step;
      const Evaluation plus = evaluate(forward);
      value[idx] = original - options.step;
      const Evaluation minus = evaluate(forward);
      value[idx] = original;
      if (plus.kinks != base_kinks || minus.kinks != base_kinks) {
        ++entry.skipped;
        continue;
      }
      const double numeric = (plus.loss - minus.loss) / (2.0 * options.step);
      const double exact = analytic[pi][idx];
      const double denom = std::max({std::abs(numeric), std::abs(exact), options.abs_floor});
      entry.max_rel_error = std::max(entry.max_rel_error, std::abs(numeric - exact) / denom);
      ++entry.checked;
    }
    entry.passed = entry.max_rel_error < options.tolerance;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace cgl
