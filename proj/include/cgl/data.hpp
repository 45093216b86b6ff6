// Copyright 2026 The cgl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cgl/tensor.hpp"

namespace cgl {

/// One categorical attribute of the synthetic items (e.g. color with 8 values).
struct AttributeSpec {
  std::string name;
  std::vector<std::string> values;
};

std::vector<AttributeSpec> default_attributes();

struct DatasetConfig {
  std::vector<AttributeSpec> attributes = default_attributes();
  std::size_t items = 256;
  std::size_t train_triplets = 2048;
  std::size_t eval_triplets = 512;
  std::size_t changes_per_text = 1;
  std::size_t image_dim = 64;
  std::size_t text_dim = 32;
  double noise_scale = 0.05;  // item noise norm relative to the attribute signal norm
  std::uint64_t seed = 0;
};

/// A synthetic stand-in for an image: an id plus one category index per attribute.
struct Item {
  std::size_t id = 0;
  std::vector<std::size_t> attributes;
};

struct ModificationText {
  std::vector<std::string> tokens;
  bool operator==(const ModificationText&) const = default;
};

/// (source, text, target) supervision unit. `key` is the position in its list
/// and doubles as the graph node index for training triplets.
struct TripletRecord {
  std::size_t key = 0;
  std::size_t source_id = 0;
  std::size_t target_id = 0;
  ModificationText text;
  bool operator==(const TripletRecord&) const = default;
};

/// Closed token set: "make", attribute names, and every attribute value.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::span<const AttributeSpec> attributes);

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  /// Throws ValidationError for out-of-vocabulary tokens.
  std::size_t index(const std::string& token) const;
  bool contains(const std::string& token) const { return lookup_.count(token) != 0; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, std::size_t> lookup_;
};

/// Tokens for setting `attribute` to `value`: {"make", name, value}.
ModificationText change_text(const AttributeSpec& attribute, std::size_t value);

/// Applies every (attribute, value) change named by the text to `source`.
/// Throws ValidationError on malformed texts.
std::vector<std::size_t> apply_text(std::span<const AttributeSpec> attributes,
                                    std::span<const std::size_t> source,
                                    const ModificationText& text);

/// Frozen random projections replacing the learned image and text encoders.
struct StubEncoders {
  Tensor image_projection;  // [D_V x sum(cardinalities)], applied to the attribute one-hot
  Tensor item_noise;        // [M x D_V], fixed per item
  Tensor text_projection;   // [D_T x |vocabulary|], applied to the token counts
  std::vector<std::size_t> attribute_offsets;
  std::uint64_t seed = 0;

  std::size_t image_dim() const { return image_projection.rows(); }
  std::size_t text_dim() const { return text_projection.rows(); }
};

struct Dataset {
  DatasetConfig config;
  std::vector<Item> items;
  std::vector<TripletRecord> train;
  std::vector<TripletRecord> eval;
  Vocabulary vocabulary;
  StubEncoders encoders;
};

/// Deterministic in (config, seed). Throws ValidationError for infeasible configs.
Dataset generate_dataset(const DatasetConfig& config);

/// One D_V row per item; an unknown id is a ValidationError.
std::vector<double> encode_image(const Item& item, const StubEncoders& encoders);
/// Bag-of-tokens times the text projection. An empty token list encodes to zero.
std::vector<double> encode_text(const ModificationText& text, const Vocabulary& vocabulary,
                                const StubEncoders& encoders);

/// [M x D_V] features of all items, row i = item i.
Tensor encode_items(const Dataset& dataset);
/// [N x D_T] text features of a triplet list.
Tensor encode_texts(const Dataset& dataset, std::span<const TripletRecord> triplets);

/// Checks every triplet maps its source to its target under apply_text.
/// Returns the number of inconsistent records.
std::size_t count_inconsistent(const Dataset& dataset, std::span<const TripletRecord> triplets);

/// File names inside a dataset directory.
namespace files {
inline constexpr const char* kItems = "items.jsonl";
inline constexpr const char* kTrain = "triplets_train.jsonl";
inline constexpr const char* kEval = "triplets_eval.jsonl";
inline constexpr const char* kVocab = "vocab.json";
inline constexpr const char* kEncoders = "encoders.bin";
}  // namespace files

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

/// Reads a triplet list file (header line followed by one record per line).
std::vector<TripletRecord> read_triplets(const std::filesystem::path& path);
std::string triplets_jsonl(std::span<const TripletRecord> triplets, const std::string& split,
                           const DatasetConfig& config);

}  // namespace cgl
