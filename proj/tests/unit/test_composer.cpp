// Copyright 2026 The cgl Authors
// SPDX-License-Identifier: Apache-2.0

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "cgl/checks.hpp"
#include "cgl/composer.hpp"
#include "cgl/error.hpp"
#include "cgl/ops.hpp"
#include "cgl/optim.hpp"
#include "test_util.hpp"

namespace cgl {
namespace {

using testing::kPropertySeeds;
using testing::random_matrix;

constexpr std::size_t kDv = 16;
constexpr std::size_t kDt = 8;
constexpr char kVariants[] = {'a', 'b', 'c', 'd', 'e'};

std::unique_ptr<RticComposer> rtic(char variant, std::uint64_t seed) {
  Rng rng(seed, "composer");
  return std::make_unique<RticComposer>(ComposerConfig::variant(variant, kDv, kDt), rng);
}

struct Batch {
  Var source;
  Var text;
};

Batch batch(std::size_t b, std::uint64_t seed) {
  Rng rng(seed, "batch");
  return {Var(random_matrix(b, kDv, rng)), Var(random_matrix(b, kDt, rng))};
}

std::set<std::string> names(Module& m) {
  std::set<std::string> out;
  for (Parameter* p : m.parameters()) out.insert(p->name);
  return out;
}

TEST(ComposerConfig, VariantFlags) {
  const auto a = ComposerConfig::variant('a');
  EXPECT_EQ(a.source_path, SourcePath::kAdd);
  EXPECT_TRUE(a.inner_skips);
  EXPECT_FALSE(a.extra_image_projection);
  EXPECT_FALSE(ComposerConfig::variant('b').inner_skips);
  EXPECT_EQ(ComposerConfig::variant('b').source_path, SourcePath::kAdd);
  EXPECT_EQ(ComposerConfig::variant('c').source_path, SourcePath::kNone);
  EXPECT_EQ(ComposerConfig::variant('d').source_path, SourcePath::kInterpolate);
  EXPECT_TRUE(ComposerConfig::variant('d').inner_skips);
  EXPECT_TRUE(ComposerConfig::variant('e').extra_image_projection);
  EXPECT_EQ(ComposerConfig::variant('d').n_blocks, 4u);
  EXPECT_THROW(ComposerConfig::variant('f'), ValidationError);
  for (char v : kVariants) {
    const auto c = ComposerConfig::variant(v, kDv, kDt);
    EXPECT_EQ(ComposerConfig::from_json(c.to_json()), c);
  }
}

TEST(ComposerConfig, Validation) {
  ComposerConfig c;
  c.n_blocks = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  Rng rng(0);
  EXPECT_THROW(RticComposer(c, rng), ValidationError);
}

TEST(RticComposer, ShapeInvarianceForAllVariants) {
  for (std::uint64_t seed = 0; seed < kPropertySeeds; ++seed) {
    const std::size_t b = 2 + seed % 9;
    const Batch in = batch(b, seed);
    for (char v : kVariants) {
      auto c = rtic(v, seed);
      EXPECT_EQ(c->compose(in.source, in.text).shape(), (Shape{b, kDv})) << v;
      c->set_mode(Mode::kEval);
      EXPECT_EQ(c->compose(in.source, in.text).shape(), (Shape{b, kDv})) << v;
    }
    Rng rng(seed, "tirg");
    TirgComposer t(TirgConfig{kDv, kDt, 0.01}, rng);
    EXPECT_EQ(t.compose(in.source, in.text).shape(), (Shape{b, kDv}));
  }
}

TEST(RticComposer, LayerWidthsFollowTheBlockTable) {
  auto c = rtic('d', 0);
  std::map<std::string, Shape> shapes;
  for (Parameter* p : c->parameters()) shapes[p->name] = p->var.value().shape();
  EXPECT_EQ(shapes.at("fusion.bn.gamma"), (Shape{kDv + kDt}));
  EXPECT_EQ(shapes.at("fusion.linear.weight"), (Shape{kDv + kDt, kDv}));
  for (int i = 0; i < 4; ++i) {
    const std::string e = "error." + std::to_string(i) + ".";
    EXPECT_EQ(shapes.at(e + "linear0.weight"), (Shape{kDv, kDv / 2}));
    EXPECT_EQ(shapes.at(e + "bn0.gamma"), (Shape{kDv / 2}));
    EXPECT_EQ(shapes.at(e + "linear1.weight"), (Shape{kDv / 2, kDv / 2}));
    EXPECT_EQ(shapes.at(e + "bn1.gamma"), (Shape{kDv / 2}));
    EXPECT_EQ(shapes.at(e + "linear2.weight"), (Shape{kDv / 2, kDv}));
  }
  EXPECT_EQ(shapes.at("gate.linear0.weight"), (Shape{kDv, kDv}));
  EXPECT_EQ(shapes.at("gate.linear1.weight"), (Shape{kDv, kDv}));
  EXPECT_EQ(shapes.count("source_projection.weight"), 0u);
}

TEST(RticComposer, VariantSpecificParameters) {
  auto has_prefix = [](const std::set<std::string>& s, const std::string& p) {
    for (const auto& n : s)
      if (n.rfind(p, 0) == 0) return true;
    return false;
  };
  auto c = rtic('c', 0);
  EXPECT_FALSE(has_prefix(names(*c), "gate."));
  auto e = rtic('e', 0);
  EXPECT_TRUE(has_prefix(names(*e), "source_projection."));
  for (char v : kVariants) {
    auto m = rtic(v, 0);
    EXPECT_EQ(names(*m).size(), m->parameters().size()) << "duplicate names in variant " << v;
  }
}

TEST(RticComposer, InterpolationIdentities) {
  for (std::uint64_t seed = 0; seed < kPropertySeeds; ++seed) {
    auto c = rtic('d', seed);
    if (seed % 2) c->set_mode(Mode::kEval);
    const Batch in = batch(6, seed);
    const ComposeTrace ones = c->trace(in.source, in.text, 1.0);
    EXPECT_EQ(ones.output.value(), in.source.value()) << seed;
    const ComposeTrace zeros = c->trace(in.source, in.text, 0.0);
    EXPECT_EQ(zeros.output.value(), zeros.residual.value()) << seed;
    const ComposeTrace free = c->trace(in.source, in.text);
    for (double s : free.gate.value().values()) {
      EXPECT_GT(s, 0.0);
      EXPECT_LT(s, 1.0);
    }
  }
}

TEST(RticComposer, InterpolationFormula) {
  auto c = rtic('d', 4);
  c->set_mode(Mode::kEval);
  const Batch in = batch(5, 4);
  const ComposeTrace tr = c->trace(in.source, in.text);
  for (std::size_t i = 0; i < tr.output.value().size(); ++i) {
    const double s = tr.gate.value()[i];
    const double expected = (1.0 - s) * tr.residual.value()[i] + s * in.source.value()[i];
    EXPECT_NEAR(tr.output.value()[i], expected, 1e-14);
  }
  auto a = rtic('a', 4);
  a->set_mode(Mode::kEval);
  const ComposeTrace ta = a->trace(in.source, in.text);
  for (std::size_t i = 0; i < ta.output.value().size(); ++i) {
    EXPECT_NEAR(ta.output.value()[i], ta.residual.value()[i] + ta.gate.value()[i] * in.source.value()[i], 1e-14);
  }
}

TEST(RticComposer, ZeroedErrorBlocksGiveTheFusedFeature) {
  for (std::uint64_t seed = 0; seed < kPropertySeeds; ++seed) {
    for (char v : {'a', 'c', 'd', 'e'}) {
      auto c = rtic(v, seed);
      for (auto& e : c->error_blocks()) {
        e.out.weight.var.mutable_value().fill(0.0);
        e.out.bias.var.mutable_value().fill(0.0);
      }
      const Batch in = batch(4, seed);
      const ComposeTrace tr = c->trace(in.source, in.text);
      EXPECT_EQ(tr.residual.value(), tr.fused.value()) << v << seed;
    }
  }
}

TEST(RticComposer, VariantsDifferUnderIdenticalSeeds) {
  const Batch in = batch(8, 1);
  auto d = rtic('d', 1);
  auto b = rtic('b', 1);
  const Tensor od = d->compose(in.source, in.text).value();
  const Tensor ob = b->compose(in.source, in.text).value();
  EXPECT_EQ(od.shape(), (Shape{8, kDv}));
  EXPECT_EQ(ob.shape(), (Shape{8, kDv}));
  EXPECT_GT(max_abs_diff(od, ob), 1e-6);
}

TEST(RticComposer, DimensionErrors) {
  auto c = rtic('d', 0);
  Rng rng(0);
  EXPECT_THROW(c->compose(Var(random_matrix(4, kDv + 1, rng)), Var(random_matrix(4, kDt, rng))), DimensionError);
  EXPECT_THROW(c->compose(Var(random_matrix(4, kDv, rng)), Var(random_matrix(3, kDt, rng))), DimensionError);
  EXPECT_THROW(c->compose(Var(random_matrix(4, kDv, rng)), Var(random_matrix(4, kDt + 2, rng))), DimensionError);
}

TEST(RticComposer, EveryParameterReceivesGradient) {
  for (char v : kVariants) {
    auto c = rtic(v, 3);
    std::map<std::string, bool> touched;
    for (Parameter* p : c->parameters()) touched[p->name] = false;
    for (std::uint64_t step = 0; step < 10; ++step) {
      const Batch in = batch(8, 100 + step);
      Rng rng(step, "probe");
      const Tensor probe = random_matrix(8, kDv, rng);
      auto params = c->parameters();
      zero_grad(params);
      weighted_sum(c->compose(in.source, in.text), probe).backward();
      for (Parameter* p : params) {
        if (!p->var.has_grad()) continue;
        for (double g : p->var.grad().values()) {
          if (g != 0.0) touched[p->name] = true;
        }
      }
    }
    for (const auto& [name, ok] : touched) EXPECT_TRUE(ok) << v << ": " << name;
  }
}

TEST(RticComposer, GradcheckAllVariants) {
  for (std::uint64_t seed = 0; seed < kPropertySeeds; ++seed) {
    for (char v : kVariants) {
      const auto report = composer_gradcheck("rtic", v, seed);
      EXPECT_TRUE(report.passed()) << v << " seed " << seed << " err " << report.max_rel_error();
      EXPECT_LT(report.max_rel_error(), 1e-3);
    }
    EXPECT_TRUE(composer_gradcheck("tirg", '-', seed).passed()) << "tirg seed " << seed;
  }
}

TEST(RticComposer, GradcheckFlagsCorruption) {
  GradcheckOptions options;
  options.corrupt_first = 1.5;
  EXPECT_FALSE(composer_gradcheck("rtic", 'd', 0, options).passed());
}

TEST(TirgComposer, OutputFormula) {
  Rng rng(2, "tirg");
  TirgComposer t(TirgConfig{kDv, kDt, 0.01}, rng);
  t.set_mode(Mode::kEval);
  const Batch in = batch(3, 2);
  const ComposeTrace tr = t.trace(in.source, in.text);
  for (std::size_t i = 0; i < tr.output.value().size(); ++i) {
    const double expected = tr.gate.value()[i] * in.source.value()[i] + tr.residual.value()[i];
    EXPECT_NEAR(tr.output.value()[i], expected, 1e-14);  // both scalar weights start at 1
  }
  std::set<std::string> n = names(t);
  EXPECT_TRUE(n.count("gate_weight"));
  EXPECT_TRUE(n.count("residual_weight"));
}

TEST(Clone, FreshParametersSameStructure) {
  for (char v : kVariants) {
    auto c = rtic(v, 0);
    Rng rng(99, "clone");
    auto clone = c->clone_architecture(rng);
    EXPECT_EQ(names(*c), names(*clone));
    const Batch in = batch(4, 0);
    EXPECT_GT(max_abs_diff(c->compose(in.source, in.text).value(), clone->compose(in.source, in.text).value()),
              1e-9);
    // Training the original leaves the clone untouched.
    std::map<std::string, Tensor> before;
    for (Parameter* p : clone->parameters()) before[p->name] = p->var.value();
    Rng prng(0, "probe");
    weighted_sum(c->compose(in.source, in.text), random_matrix(4, kDv, prng)).backward();
    auto params = c->parameters();
    sgd_step(params, 0.5);
    for (Parameter* p : clone->parameters()) EXPECT_EQ(p->var.value(), before[p->name]) << p->name;
  }
}

TEST(Transfer, CopiesParametersAndStatistics) {
  for (char v : kVariants) {
    auto src = rtic(v, 1);
    const Batch warm = batch(8, 5);
    src->compose(warm.source, warm.text);  // move running statistics off their defaults
    auto dst = rtic(v, 2);
    transfer_weights(*src, *dst);
    for (Mode m : {Mode::kEval, Mode::kTrain}) {
      src->set_mode(m);
      dst->set_mode(m);
      const Batch in = batch(4, 6);
      EXPECT_EQ(src->compose(in.source, in.text).value(), dst->compose(in.source, in.text).value()) << v;
    }
    auto sb = src->buffers();
    auto db = dst->buffers();
    ASSERT_EQ(sb.size(), db.size());
    for (std::size_t i = 0; i < sb.size(); ++i) EXPECT_EQ(*sb[i].tensor, *db[i].tensor);
  }
}

TEST(Transfer, DestinationIsIndependent) {
  auto src = rtic('d', 1);
  auto dst = rtic('d', 2);
  transfer_weights(*src, *dst);
  std::map<std::string, Tensor> before;
  for (Parameter* p : src->parameters()) before[p->name] = p->var.value();
  const Batch in = batch(4, 0);
  Rng prng(0, "probe");
  weighted_sum(dst->compose(in.source, in.text), random_matrix(4, kDv, prng)).backward();
  auto params = dst->parameters();
  sgd_step(params, 0.5);
  for (Parameter* p : src->parameters()) EXPECT_EQ(p->var.value(), before[p->name]);
}

TEST(Transfer, ArchitectureMismatch) {
  Rng rng(0);
  ComposerConfig four = ComposerConfig::variant('d', kDv, kDt);
  ComposerConfig two = four;
  two.n_blocks = 2;
  RticComposer a(four, rng), b(two, rng);
  EXPECT_THROW(transfer_weights(a, b), ValidationError);
  TirgComposer t(TirgConfig{kDv, kDt, 0.01}, rng);
  EXPECT_THROW(transfer_weights(a, t), ValidationError);
  auto c = rtic('c', 0);
  EXPECT_THROW(transfer_weights(a, *c), ValidationError);
}

TEST(State, ExportImportRoundTrip) {
  for (char v : kVariants) {
    auto src = rtic(v, 1);
    const Batch warm = batch(8, 5);
    src->compose(warm.source, warm.text);
    io::Archive archive;
    export_state(*src, "main.", archive);
    const io::Archive parsed = io::Archive::parse(archive.serialize(), "mem");
    auto restored = composer_from_description(describe(*src));
    import_state(*restored, "main.", parsed);
    src->set_mode(Mode::kEval);
    restored->set_mode(Mode::kEval);
    const Batch in = batch(4, 9);
    EXPECT_EQ(src->compose(in.source, in.text).value(), restored->compose(in.source, in.text).value()) << v;
  }
}

TEST(State, MissingEntryRejected) {
  auto src = rtic('d', 1);
  io::Archive archive;
  export_state(*src, "main.", archive);
  archive.entries.pop_back();
  auto dst = rtic('d', 2);
  EXPECT_THROW(import_state(*dst, "main.", archive), ValidationError);
}

}  // namespace
}  // namespace cgl
