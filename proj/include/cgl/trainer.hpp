// Copyright 2026 The cgl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "cgl/composer.hpp"
#include "cgl/data.hpp"
#include "cgl/evaluator.hpp"
#include "cgl/gcn.hpp"
#include "cgl/graph.hpp"
#include "cgl/io.hpp"

namespace cgl {

enum class TrainMode { kStage1, kJoint, kLinearBce, kPseudoPairs };
enum class InitFrom { kScratch, kTransfer };

std::string to_string(TrainMode mode);
TrainMode train_mode_from_string(const std::string& name);
std::string to_string(InitFrom init);
InitFrom init_from_string(const std::string& name);

struct TrainConfig {
  TrainMode mode = TrainMode::kStage1;
  InitFrom init_from = InitFrom::kScratch;
  std::size_t batch_size = 32;
  std::size_t epochs = 30;
  double lr = 0.01;
  std::size_t lr_step = 10;
  double lr_factor = 0.70710678118654752440;
  double lambda_pair = 1.0;
  double lambda_bce = 1.0;
  double temperature = 10.0;
  std::uint64_t seed = 0;
  std::size_t gcn_depth = 2;
  std::size_t gcn_hidden = 0;  // 0 = D_V
  double pseudo_pair_threshold = 0.5;
  bool evaluate_each_epoch = true;

  void validate() const;
  /// Learning rate used during training epoch `epoch` (counted from 0).
  double lr_at(std::size_t epoch) const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

/// Batch-classification ranking loss: rows of both sides are L2-normalized and
/// each composed row must pick its own target among all targets of the batch.
Var dml_loss(const Var& composed, const Var& targets, double temperature);

/// One epoch: a permutation of 0..n-1 cut into batches; a trailing batch smaller than 2 is dropped.
std::vector<std::vector<std::size_t>> batch_sample(std::size_t n, std::size_t batch_size, Rng& rng);

/// (src_a, text_a, trg_b) and (src_b, text_b, trg_a).
std::pair<TripletRecord, TripletRecord> swap_targets(const TripletRecord& a, const TripletRecord& b);

struct PseudoPairResult {
  std::vector<TripletRecord> triplets;  // originals followed by swapped records, keys reassigned
  std::size_t swapped = 0;
  double lowest_similarity = 0.0;  // of the pairs that were used
  std::vector<std::string> warnings;
};

/// Swaps targets of triplet pairs whose target features have cosine similarity
/// >= threshold, most similar first, until `quota` swapped records exist
/// (0 = number of triplets). Pairs sharing the same target item are skipped
/// because swapping them reproduces the originals.
PseudoPairResult generate_pseudo_pairs(std::span<const TripletRecord> triplets, const Tensor& item_features,
                                       double threshold, std::size_t quota = 0);

struct StepRecord {
  std::size_t epoch = 0;  // 1-based
  std::size_t step = 0;
  double lr = 0.0;
  double loss_pair = 0.0;
  double loss_bce = 0.0;
  double loss_final = 0.0;
};

/// Row of the metric log. Epoch 0 is the evaluation before any update.
struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  std::optional<double> loss_pair;
  std::optional<double> loss_bce;
  std::optional<double> loss_final;
  std::optional<RetrievalReport> report;

  nlohmann::json to_json() const;
};

struct TrainHooks {
  std::function<void(const EpochRecord&)> on_epoch;
  std::function<void(const StepRecord&)> on_step;
};

struct TrainResult {
  std::vector<EpochRecord> log;
  std::vector<StepRecord> steps;
};

/// Which composer to build: kind plus its config JSON.
struct ComposerSpec {
  std::string kind = "rtic";
  nlohmann::json config = ComposerConfig{}.to_json();

  static ComposerSpec rtic(char variant, std::size_t d_v = 64, std::size_t d_t = 32);
  static ComposerSpec tirg(std::size_t d_v = 64, std::size_t d_t = 32);
};

/// Everything one training run owns.
struct Session {
  TrainConfig config;
  std::unique_ptr<Composer> main;
  std::unique_ptr<NodeProjection> aux;  // GCN stream or linear head
  std::optional<ComposerSpec> stream_spec;
  SparseMatrix labels;                  // binarized graph, for pseudo-labels
  std::vector<TripletRecord> train_set;
  std::size_t swapped = 0;
  std::string graph_fingerprint;
  std::vector<std::string> warnings;

  std::vector<Parameter*> parameters();
};

/// Builds the models of a run. `bundle` is required for joint and linear-bce;
/// `transfer_source` for init_from = transfer. `stream` defaults to the main spec.
Session make_session(const TrainConfig& config, const Dataset& dataset, const ComposerSpec& main,
                     const GraphBundle* bundle = nullptr, Composer* transfer_source = nullptr,
                     std::optional<ComposerSpec> stream = std::nullopt);

TrainResult train(Session& session, const Dataset& dataset, const TrainHooks& hooks = {});

// ---------------------------------------------------------------------------
// Checkpoints

/// Archive with "main." entries for the main composer and "stream." entries
/// for the auxiliary branch, if any.
io::Archive checkpoint_archive(Session& session, const nlohmann::json& extra = {});
void write_checkpoint(Session& session, const std::filesystem::path& path, const nlohmann::json& extra = {});

struct LoadedCheckpoint {
  io::Archive archive;
  nlohmann::json metadata;
  std::unique_ptr<Composer> main;
};

/// Restores only the main composer, in eval mode.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);
LoadedCheckpoint load_checkpoint_archive(io::Archive archive);

/// Rebuilds the auxiliary branch stored in a checkpoint (for inspection or resumption).
std::unique_ptr<NodeProjection> load_auxiliary(const LoadedCheckpoint& checkpoint, const GraphBundle& bundle);

}  // namespace cgl
