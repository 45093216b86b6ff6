// Copyright 2026 The cgl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgl/composer.hpp"

#include <algorithm>
#include <map>

#include "cgl/error.hpp"
#include "cgl/ops.hpp"

namespace cgl {

using nlohmann::json;

std::string to_string(SourcePath path) {
  switch (path) {
    case SourcePath::kInterpolate: return "interpolate";
    case SourcePath::kAdd: return "add";
    case SourcePath::kNone: return "none";
  }
  return "?";
}

SourcePath source_path_from_string(const std::string& name) {
  if (name == "interpolate") return SourcePath::kInterpolate;
  if (name == "add") return SourcePath::kAdd;
  if (name == "none") return SourcePath::kNone;
  throw ValidationError("unknown source path '" + name + "'");
}

ComposerConfig ComposerConfig::variant(char name, std::size_t d_v, std::size_t d_t) {
  ComposerConfig c;
  c.d_v = d_v;
  c.d_t = d_t;
  switch (name) {
    case 'a': c.source_path = SourcePath::kAdd; break;
    case 'b':
      c.source_path = SourcePath::kAdd;
      c.inner_skips = false;
      break;
    case 'c': c.source_path = SourcePath::kNone; break;
    case 'd': c.source_path = SourcePath::kInterpolate; break;
    case 'e':
      c.source_path = SourcePath::kAdd;
      c.extra_image_projection = true;
      break;
    default: throw ValidationError(std::string("unknown variant '") + name + "', expected a..e");
  }
  return c;
}

void ComposerConfig::validate() const {
  if (n_blocks < 1) throw ValidationError("composer needs at least one error block");
  if (d_v < 2) throw ValidationError("image dimension must be at least 2");
  if (d_t < 1) throw ValidationError("text dimension must be positive");
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) throw ValidationError("leaky slope must lie in [0, 1)");
}

json ComposerConfig::to_json() const {
  return {{"d_v", d_v},
          {"d_t", d_t},
          {"n_blocks", n_blocks},
          {"inner_skips", inner_skips},
          {"source_path", to_string(source_path)},
          {"extra_image_projection", extra_image_projection},
          {"leaky_slope", leaky_slope}};
}

ComposerConfig ComposerConfig::from_json(const json& j) {
  ComposerConfig c;
  c.d_v = j.at("d_v").get<std::size_t>();
  c.d_t = j.at("d_t").get<std::size_t>();
  c.n_blocks = j.at("n_blocks").get<std::size_t>();
  c.inner_skips = j.at("inner_skips").get<bool>();
  c.source_path = source_path_from_string(j.at("source_path").get<std::string>());
  c.extra_image_projection = j.at("extra_image_projection").get<bool>();
  c.leaky_slope = j.at("leaky_slope").get<double>();
  c.validate();
  return c;
}

void Composer::check_inputs(const Var& source, const Var& text) const {
  const Tensor& v = source.value();
  const Tensor& t = text.value();
  if (v.rank() != 2 || t.rank() != 2) throw DimensionError("composer inputs must be matrices");
  if (v.rows() != t.rows()) {
    throw DimensionError("batch mismatch: " + shape_string(v.shape()) + " vs " + shape_string(t.shape()));
  }
  if (v.cols() != image_dim()) {
    throw DimensionError("image feature width " + std::to_string(v.cols()) + ", composer expects " +
                         std::to_string(image_dim()));
  }
  if (t.cols() != text_dim()) {
    throw DimensionError("text feature width " + std::to_string(t.cols()) + ", composer expects " +
                         std::to_string(text_dim()));
  }
}

namespace {

Var constant_gate(const Shape& shape, double value) { return Var(Tensor(shape, value)); }

}  // namespace

// ---------------------------------------------------------------------------
// RTIC

RticComposer::RticComposer(const ComposerConfig& config, Rng& rng)
    : config_((config.validate(), config)),
      fusion_bn_("fusion.bn", config.d_v + config.d_t),
      fusion_linear_("fusion.linear", config.d_v + config.d_t, config.d_v, true, rng) {
  const std::size_t d = config.d_v;
  const std::size_t h = d / 2;
  if (config.extra_image_projection) source_projection_.emplace("source_projection", d, d, true, rng);
  errors_.reserve(config.n_blocks);
  for (std::size_t i = 0; i < config.n_blocks; ++i) {
    const std::string base = "error." + std::to_string(i);
    ErrorBlock block{Linear(base + ".linear0", d, h, true, rng), BatchNorm(base + ".bn0", h),
                     Linear(base + ".linear1", h, h, true, rng), BatchNorm(base + ".bn1", h),
                     Linear(base + ".linear2", h, d, true, rng)};
    errors_.push_back(std::move(block));
  }
  if (config.source_path != SourcePath::kNone) {
    gate_.emplace(GateBlock{Linear("gate.linear0", d, d, true, rng), BatchNorm("gate.bn", d),
                            Linear("gate.linear1", d, d, true, rng)});
  }
}

ComposeTrace RticComposer::trace(const Var& source, const Var& text, std::optional<double> gate_fill) {
  check_inputs(source, text);
  const double slope = config_.leaky_slope;
  ComposeTrace tr;
  tr.source = source_projection_ ? source_projection_->forward(source) : source;

  Var x = concat_features(tr.source, text);
  x = fusion_bn_.forward(x);
  x = leaky_relu(x, slope);
  tr.fused = fusion_linear_.forward(x);

  Var h = tr.fused;
  for (ErrorBlock& e : errors_) {
    Var y = e.in.forward(h);
    y = leaky_relu(e.bn0.forward(y), slope);
    y = e.mid.forward(y);
    y = leaky_relu(e.bn1.forward(y), slope);
    y = e.out.forward(y);
    h = config_.inner_skips ? add(h, y) : y;
  }
  tr.residual = h;

  if (!gate_) {
    tr.output = tr.residual;
    return tr;
  }
  if (gate_fill) {
    tr.gate = constant_gate(tr.source.shape(), *gate_fill);
  } else {
    Var s = gate_->in.forward(tr.fused);
    s = leaky_relu(gate_->bn.forward(s), slope);
    tr.gate = sigmoid(gate_->out.forward(s));
  }
  tr.output = config_.source_path == SourcePath::kInterpolate
                  ? interpolate(tr.residual, tr.source, tr.gate)
                  : add(tr.residual, mul(tr.gate, tr.source));
  return tr;
}

std::unique_ptr<Composer> RticComposer::clone_architecture(Rng& rng) const {
  return std::make_unique<RticComposer>(config_, rng);
}

void RticComposer::collect_parameters(std::vector<Parameter*>& out) {
  if (source_projection_) source_projection_->collect_parameters(out);
  fusion_bn_.collect_parameters(out);
  fusion_linear_.collect_parameters(out);
  for (ErrorBlock& e : errors_) {
    e.in.collect_parameters(out);
    e.bn0.collect_parameters(out);
    e.mid.collect_parameters(out);
    e.bn1.collect_parameters(out);
    e.out.collect_parameters(out);
  }
  if (gate_) {
    gate_->in.collect_parameters(out);
    gate_->bn.collect_parameters(out);
    gate_->out.collect_parameters(out);
  }
}

void RticComposer::collect_buffers(std::vector<BufferRef>& out) {
  fusion_bn_.collect_buffers(out);
  for (ErrorBlock& e : errors_) {
    e.bn0.collect_buffers(out);
    e.bn1.collect_buffers(out);
  }
  if (gate_) gate_->bn.collect_buffers(out);
}

void RticComposer::set_mode(Mode mode) {
  fusion_bn_.set_mode(mode);
  for (ErrorBlock& e : errors_) {
    e.bn0.set_mode(mode);
    e.bn1.set_mode(mode);
  }
  if (gate_) gate_->bn.set_mode(mode);
}

// ---------------------------------------------------------------------------
// TIRG

json TirgConfig::to_json() const { return {{"d_v", d_v}, {"d_t", d_t}, {"leaky_slope", leaky_slope}}; }

TirgConfig TirgConfig::from_json(const json& j) {
  TirgConfig c;
  c.d_v = j.at("d_v").get<std::size_t>();
  c.d_t = j.at("d_t").get<std::size_t>();
  c.leaky_slope = j.at("leaky_slope").get<double>();
  if (c.d_v < 1 || c.d_t < 1) throw ValidationError("composer dimensions must be positive");
  return c;
}

TirgComposer::TirgComposer(const TirgConfig& config, Rng& rng)
    : config_(config),
      gate_{Linear("gate.linear0", config.d_v + config.d_t, config.d_v, true, rng),
            BatchNorm("gate.bn", config.d_v), Linear("gate.linear1", config.d_v, config.d_v, true, rng)},
      residual_{Linear("residual.linear0", config.d_v + config.d_t, config.d_v, true, rng),
                BatchNorm("residual.bn", config.d_v),
                Linear("residual.linear1", config.d_v, config.d_v, true, rng)},
      gate_weight_("gate_weight", Tensor::scalar(1.0)),
      residual_weight_("residual_weight", Tensor::scalar(1.0)) {}

Var TirgComposer::branch(Branch& b, const Var& input) const {
  return b.out.forward(leaky_relu(b.bn.forward(b.in.forward(input)), config_.leaky_slope));
}

ComposeTrace TirgComposer::trace(const Var& source, const Var& text, std::optional<double> gate_fill) {
  check_inputs(source, text);
  ComposeTrace tr;
  tr.source = source;
  tr.fused = concat_features(source, text);
  tr.gate = gate_fill ? constant_gate(source.shape(), *gate_fill) : sigmoid(branch(gate_, tr.fused));
  tr.residual = branch(residual_, tr.fused);
  tr.output = add(scale_by(mul(tr.gate, source), gate_weight_.var), scale_by(tr.residual, residual_weight_.var));
  return tr;
}

std::unique_ptr<Composer> TirgComposer::clone_architecture(Rng& rng) const {
  return std::make_unique<TirgComposer>(config_, rng);
}

void TirgComposer::collect_parameters(std::vector<Parameter*>& out) {
  for (Branch* b : {&gate_, &residual_}) {
    b->in.collect_parameters(out);
    b->bn.collect_parameters(out);
    b->out.collect_parameters(out);
  }
  out.push_back(&gate_weight_);
  out.push_back(&residual_weight_);
}

void TirgComposer::collect_buffers(std::vector<BufferRef>& out) {
  gate_.bn.collect_buffers(out);
  residual_.bn.collect_buffers(out);
}

void TirgComposer::set_mode(Mode mode) {
  gate_.bn.set_mode(mode);
  residual_.bn.set_mode(mode);
}

// ---------------------------------------------------------------------------
// Construction, transfer and serialization

std::unique_ptr<Composer> make_composer(const std::string& kind, const json& config, Rng& rng) {
  if (kind == "rtic") return std::make_unique<RticComposer>(ComposerConfig::from_json(config), rng);
  if (kind == "tirg") return std::make_unique<TirgComposer>(TirgConfig::from_json(config), rng);
  throw ValidationError("unknown composer kind '" + kind + "'");
}

namespace {

std::map<std::string, Tensor*> state_map(Module& c) {
  std::map<std::string, Tensor*> out;
  for (Parameter* p : c.parameters()) out[p->name] = &p->var.mutable_value();
  for (const BufferRef& b : c.buffers()) out[b.name] = b.tensor;
  return out;
}

}  // namespace

void transfer_weights(Composer& source, Composer& dest) {
  if (&source == &dest) return;
  if (source.kind() != dest.kind() || source.config_json() != dest.config_json()) {
    throw ValidationError("cannot transfer weights between different architectures (" + describe(source).dump() +
                          " vs " + describe(dest).dump() + ")");
  }
  auto from = state_map(source);
  auto to = state_map(dest);
  if (from.size() != to.size()) throw ValidationError("cannot transfer weights: state sizes differ");
  for (auto& [name, dst] : to) {
    auto it = from.find(name);
    if (it == from.end() || it->second->shape() != dst->shape()) {
      throw ValidationError("cannot transfer weights: mismatch at " + name);
    }
    *dst = *it->second;
  }
}

void export_state(Module& module, const std::string& prefix, io::Archive& archive) {
  for (Parameter* p : module.parameters()) archive.entries.push_back({prefix + "." + p->name, p->var.value()});
  for (const BufferRef& b : module.buffers()) archive.entries.push_back({prefix + "." + b.name, *b.tensor});
}

void import_state(Module& module, const std::string& prefix, const io::Archive& archive) {
  for (auto& [name, dst] : state_map(module)) {
    const Tensor* src = archive.find(prefix + "." + name);
    if (!src) throw ValidationError("checkpoint is missing " + prefix + "." + name);
    if (src->shape() != dst->shape()) {
      throw ValidationError("checkpoint entry " + prefix + "." + name + " has shape " + shape_string(src->shape()) +
                            ", expected " + shape_string(dst->shape()));
    }
    *dst = *src;
  }
}

json describe(const Composer& composer) {
  return {{"kind", composer.kind()}, {"config", composer.config_json()}};
}

std::unique_ptr<Composer> composer_from_description(const json& description) {
  Rng placeholder(0, "restore");
  return make_composer(description.at("kind").get<std::string>(), description.at("config"), placeholder);
}

}  // namespace cgl
