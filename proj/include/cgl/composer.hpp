// Copyright 2026 The cgl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cgl/autograd.hpp"
#include "cgl/io.hpp"
#include "cgl/nn.hpp"
#include "cgl/rng.hpp"

namespace cgl {

/// How the source feature re-enters after the error-encoding stack.
enum class SourcePath {
  kInterpolate,  // (1 - s) * X^n + s * v
  kAdd,          // X^n + s * v
  kNone,         // X^n, no gating block
};

std::string to_string(SourcePath path);
SourcePath source_path_from_string(const std::string& name);

struct ComposerConfig {
  std::size_t d_v = 64;
  std::size_t d_t = 32;
  std::size_t n_blocks = 4;
  bool inner_skips = true;
  SourcePath source_path = SourcePath::kInterpolate;
  bool extra_image_projection = false;
  double leaky_slope = 0.01;

  /// Presets for the five architecture variants 'a'..'e'; 'd' is the default.
  static ComposerConfig variant(char name, std::size_t d_v = 64, std::size_t d_t = 32);
  void validate() const;
  nlohmann::json to_json() const;
  static ComposerConfig from_json(const nlohmann::json& j);
  bool operator==(const ComposerConfig&) const = default;
};

/// Intermediate values of one composition.
struct ComposeTrace {
  Var source;    // source feature after the optional extra projection
  Var fused;     // x = F(v, t)
  Var residual;  // X^n (RTIC) or the residual branch output (TIRG)
  Var gate;      // s; undefined when the architecture has no gate
  Var output;
};

/// A network mapping (source image feature, text feature) to a target feature.
class Composer : public Module {
 public:
  virtual std::string kind() const = 0;
  virtual std::size_t image_dim() const = 0;
  virtual std::size_t text_dim() const = 0;
  /// Kind-specific configuration, enough to rebuild the architecture.
  virtual nlohmann::json config_json() const = 0;

  /// `gate_fill` replaces every gate entry by a constant (for probing limits).
  virtual ComposeTrace trace(const Var& source, const Var& text,
                             std::optional<double> gate_fill = std::nullopt) = 0;
  Var compose(const Var& source, const Var& text) { return trace(source, text).output; }

  /// Same architecture, independently initialized parameters.
  virtual std::unique_ptr<Composer> clone_architecture(Rng& rng) const = 0;

 protected:
  void check_inputs(const Var& source, const Var& text) const;
};

class RticComposer final : public Composer {
 public:
  RticComposer(const ComposerConfig& config, Rng& rng);

  std::string kind() const override { return "rtic"; }
  std::size_t image_dim() const override { return config_.d_v; }
  std::size_t text_dim() const override { return config_.d_t; }
  nlohmann::json config_json() const override { return config_.to_json(); }
  const ComposerConfig& config() const { return config_; }

  ComposeTrace trace(const Var& source, const Var& text,
                     std::optional<double> gate_fill = std::nullopt) override;
  std::unique_ptr<Composer> clone_architecture(Rng& rng) const override;

  void collect_parameters(std::vector<Parameter*>& out) override;
  void collect_buffers(std::vector<BufferRef>& out) override;
  void set_mode(Mode mode) override;

  struct ErrorBlock {
    Linear in;
    BatchNorm bn0;
    Linear mid;
    BatchNorm bn1;
    Linear out;
  };
  struct GateBlock {
    Linear in;
    BatchNorm bn;
    Linear out;
  };

  std::vector<ErrorBlock>& error_blocks() { return errors_; }

 private:
  ComposerConfig config_;
  std::optional<Linear> source_projection_;
  BatchNorm fusion_bn_;
  Linear fusion_linear_;
  std::vector<ErrorBlock> errors_;
  std::optional<GateBlock> gate_;
};

struct TirgConfig {
  std::size_t d_v = 64;
  std::size_t d_t = 32;
  double leaky_slope = 0.01;
  nlohmann::json to_json() const;
  static TirgConfig from_json(const nlohmann::json& j);
  bool operator==(const TirgConfig&) const = default;
};

/// Gated-residual baseline: w_g * sigmoid(f_gate(c)) * v + w_r * f_res(c), c = [v, t].
class TirgComposer final : public Composer {
 public:
  TirgComposer(const TirgConfig& config, Rng& rng);

  std::string kind() const override { return "tirg"; }
  std::size_t image_dim() const override { return config_.d_v; }
  std::size_t text_dim() const override { return config_.d_t; }
  nlohmann::json config_json() const override { return config_.to_json(); }

  ComposeTrace trace(const Var& source, const Var& text,
                     std::optional<double> gate_fill = std::nullopt) override;
  std::unique_ptr<Composer> clone_architecture(Rng& rng) const override;

  void collect_parameters(std::vector<Parameter*>& out) override;
  void collect_buffers(std::vector<BufferRef>& out) override;
  void set_mode(Mode mode) override;

 private:
  struct Branch {
    Linear in;
    BatchNorm bn;
    Linear out;
  };
  Var branch(Branch& b, const Var& input) const;

  TirgConfig config_;
  Branch gate_;
  Branch residual_;
  Parameter gate_weight_;
  Parameter residual_weight_;
};

/// Builds a composer from its kind ("rtic" or "tirg") and config JSON.
std::unique_ptr<Composer> make_composer(const std::string& kind, const nlohmann::json& config, Rng& rng);

/// Copies parameters and normalization statistics. Throws ValidationError when
/// the architectures differ.
void transfer_weights(Composer& source, Composer& dest);

/// Appends "<prefix>.<name>" entries for every parameter and buffer.
void export_state(Module& module, const std::string& prefix, io::Archive& archive);
/// Restores state written by export_state. Every name must be present with a matching shape.
void import_state(Module& module, const std::string& prefix, const io::Archive& archive);

/// Description stored in checkpoint metadata: {"kind": ..., "config": ...}.
nlohmann::json describe(const Composer& composer);
std::unique_ptr<Composer> composer_from_description(const nlohmann::json& description);

}  // namespace cgl
