// Copyright 2026 The cgl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgl/checks.hpp"

#include "cgl/error.hpp"
#include "cgl/ops.hpp"

namespace cgl {

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.normal() * scale;
  return t;
}

}  // namespace

GradcheckReport composer_gradcheck(const std::string& kind, char variant, std::uint64_t seed,
                                   const GradcheckOptions& options, const CheckSizes& sizes) {
  Rng rng(seed, "gradcheck.composer");
  const ComposerSpec spec = kind == "tirg" ? ComposerSpec::tirg(sizes.d_v, sizes.d_t)
                                           : ComposerSpec::rtic(variant, sizes.d_v, sizes.d_t);
  auto composer = make_composer(spec.kind, spec.config, rng);
  for (Parameter* p : composer->parameters()) {
    for (double& v : p->var.mutable_value().values()) v += 0.1 * rng.normal();
  }
  const Var source(random_tensor({sizes.batch, sizes.d_v}, rng));
  const Var text(random_tensor({sizes.batch, sizes.d_t}, rng));
  composer->set_mode(Mode::kTrain);
  for (int warm = 0; warm < 3; ++warm) {
    composer->compose(Var(random_tensor({sizes.batch, sizes.d_v}, rng)),
                      Var(random_tensor({sizes.batch, sizes.d_t}, rng)));
  }
  composer->set_mode(Mode::kEval);
  const Tensor probe = random_tensor({sizes.batch, sizes.d_v}, rng);
  auto params = composer->parameters();
  return gradcheck([&] { return weighted_sum(composer->compose(source, text), probe); }, params, options);
}

GradcheckReport gcn_gradcheck(std::uint64_t seed, const GradcheckOptions& options, const CheckSizes& sizes) {
  Rng rng(seed, "gradcheck.gcn");
  const std::size_t n = sizes.nodes;
  const RawCorrelations raw = target_correlations(random_tensor({n, sizes.d_v}, rng));
  const TauChoice tau = choose_tau(raw.matrix, 0.3);
  const CorrelationMatrix hat = normalize(reweight(binarize(raw.matrix, tau.tau)));
  auto op = std::make_shared<const SparseOperator>(SparseMatrix::from_dense(hat.values()));

  GcnStack stack(sizes.d_v, sizes.d_v, sizes.d_v, 2, rng);
  Parameter features("node_features", random_tensor({n, sizes.d_v}, rng));
  const Tensor probe = random_tensor({n, sizes.d_v}, rng);
  std::vector<Parameter*> params = stack.parameters();
  params.push_back(&features);
  return gradcheck([&] { return weighted_sum(stack.forward(op, features.var), probe); }, params, options);
}

}  // namespace cgl
