// Copyright 2026 The cgl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "cgl/composer.hpp"
#include "cgl/data.hpp"
#include "cgl/tensor.hpp"

namespace cgl {

/// Unit-norm gallery features; row r belongs to item ids[r].
struct GalleryIndex {
  std::vector<std::size_t> ids;
  Tensor features;
  std::size_t size() const { return ids.size(); }
};

/// Normalizes every row of `item_features`; row i gets id i. A zero row is a NumericalError.
GalleryIndex build_index(const Tensor& item_features);
GalleryIndex build_index(const Dataset& dataset);

struct RetrievalReport {
  std::size_t gallery_size = 0;
  std::size_t queries = 0;
  std::vector<std::size_t> ks;
  std::vector<double> recall;        // percent, aligned with ks
  std::optional<double> composite;   // (R@10 + R@50) / 2 when the gallery has >= 50 items
  std::vector<std::size_t> ranks;    // 1-based rank of the ground truth per query
  nlohmann::json echo;               // configuration of the run that produced the report

  double recall_at(std::size_t k) const;
  nlohmann::json to_json(bool with_ranks = true) const;
  std::string csv_header() const;
  std::string csv_row() const;
  bool operator==(const RetrievalReport& other) const;
};

/// {1, 5, 10} plus 50 when the gallery is large enough.
std::vector<std::size_t> default_ks(std::size_t gallery_size);

/// Composed features of the triplets in eval mode, computed in fixed-size chunks.
Tensor compose_queries(Composer& composer, const Dataset& dataset, std::span<const TripletRecord> triplets);

/// Error-encoding stack output X^n (or the residual branch output) for the same inputs.
Tensor residual_features(Composer& composer, const Dataset& dataset, std::span<const TripletRecord> triplets);

/// Ranks the gallery by cosine similarity to each query, ties broken by ascending id.
RetrievalReport evaluate_features(const Tensor& queries, std::span<const std::size_t> target_ids,
                                  const GalleryIndex& index, std::span<const std::size_t> ks);

RetrievalReport evaluate(Composer& composer, const Dataset& dataset, std::span<const TripletRecord> triplets,
                         const GalleryIndex& index, std::span<const std::size_t> ks = {});

/// Mean and sample standard deviation per metric: {"recall@1": {"mean", "std"}, ...}.
nlohmann::json summarize(std::span<const RetrievalReport> reports);

}  // namespace cgl
