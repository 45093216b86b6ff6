// Copyright 2026 The cgl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgl/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "cgl/error.hpp"
#include "linalg.hpp"

namespace cgl {

using nlohmann::json;

namespace {

constexpr std::size_t kChunk = 256;

void normalize_rows(Tensor& t, const char* what) {
  for (std::size_t r = 0; r < t.rows(); ++r) {
    auto row = t.row(r);
    double sq = 0.0;
    for (double v : row) sq += v * v;
    if (!(sq > 0.0)) throw NumericalError(std::string(what) + " row " + std::to_string(r) + " has zero norm");
    const double inv = 1.0 / std::sqrt(sq);
    for (double& v : row) v *= inv;
  }
}

template <typename Fn>
Tensor chunked(Composer& composer, const Dataset& ds, std::span<const TripletRecord> triplets, Fn pick) {
  composer.set_mode(Mode::kEval);
  const Tensor items = encode_items(ds);
  const Tensor texts = encode_texts(ds, triplets);
  Tensor out({triplets.size(), composer.image_dim()});
  for (std::size_t begin = 0; begin < triplets.size(); begin += kChunk) {
    const std::size_t end = std::min(triplets.size(), begin + kChunk);
    std::vector<std::size_t> src;
    std::vector<std::size_t> rows;
    for (std::size_t i = begin; i < end; ++i) {
      src.push_back(triplets[i].source_id);
      rows.push_back(i);
    }
    ComposeTrace tr = composer.trace(Var(gather_rows(items, src)), Var(gather_rows(texts, rows)));
    const Tensor& part = pick(tr).value();
    std::copy(part.values().begin(), part.values().end(), out.row(begin).begin());
  }
  return out;
}

}  // namespace

GalleryIndex build_index(const Tensor& item_features) {
  if (item_features.rank() != 2 || item_features.rows() == 0) throw ValidationError("gallery must be nonempty");
  GalleryIndex index;
  index.features = item_features;
  normalize_rows(index.features, "gallery");
  index.ids.resize(item_features.rows());
  for (std::size_t i = 0; i < index.ids.size(); ++i) index.ids[i] = i;
  return index;
}

GalleryIndex build_index(const Dataset& dataset) { return build_index(encode_items(dataset)); }

std::vector<std::size_t> default_ks(std::size_t gallery_size) {
  std::vector<std::size_t> ks{1, 5, 10};
  if (gallery_size >= 50) ks.push_back(50);
  return ks;
}

Tensor compose_queries(Composer& composer, const Dataset& ds, std::span<const TripletRecord> triplets) {
  return chunked(composer, ds, triplets, [](const ComposeTrace& t) -> const Var& { return t.output; });
}

Tensor residual_features(Composer& composer, const Dataset& ds, std::span<const TripletRecord> triplets) {
  return chunked(composer, ds, triplets, [](const ComposeTrace& t) -> const Var& { return t.residual; });
}

RetrievalReport evaluate_features(const Tensor& queries, std::span<const std::size_t> target_ids,
                                  const GalleryIndex& index, std::span<const std::size_t> ks) {
  if (queries.rank() != 2 || queries.rows() != target_ids.size()) {
    throw DimensionError("one target id per query required");
  }
  if (queries.cols() != index.features.cols()) throw DimensionError("query and gallery widths differ");
  std::map<std::size_t, std::size_t> position;
  for (std::size_t r = 0; r < index.ids.size(); ++r) position[index.ids[r]] = r;

  RetrievalReport report;
  report.gallery_size = index.size();
  report.queries = queries.rows();
  report.ks.assign(ks.begin(), ks.end());
  if (report.ks.empty()) report.ks = default_ks(index.size());

  Tensor q = queries;
  normalize_rows(q, "query");
  const std::size_t g = index.size();
  Tensor sims({q.rows(), g});
  linalg::gemm_nt(q.data(), index.features.data(), sims.data(), q.rows(), q.cols(), g, false);

  report.ranks.resize(q.rows());
  for (std::size_t i = 0; i < q.rows(); ++i) {
    auto it = position.find(target_ids[i]);
    if (it == position.end()) {
      throw ValidationError("target item " + std::to_string(target_ids[i]) + " is not in the gallery");
    }
    const std::size_t gt = it->second;
    const double s = sims.at(i, gt);
    std::size_t ahead = 0;
    for (std::size_t r = 0; r < g; ++r) {
      const double v = sims.at(i, r);
      if (v > s || (v == s && index.ids[r] < index.ids[gt])) ++ahead;
    }
    report.ranks[i] = ahead + 1;
  }
  for (std::size_t k : report.ks) {
    std::size_t hits = 0;
    for (std::size_t rank : report.ranks) hits += rank <= k ? 1 : 0;
    report.recall.push_back(q.rows() ? 100.0 * static_cast<double>(hits) / static_cast<double>(q.rows()) : 0.0);
  }
  if (g >= 50) {
    auto has = [&](std::size_t k) { return std::find(report.ks.begin(), report.ks.end(), k) != report.ks.end(); };
    if (has(10) && has(50)) report.composite = (report.recall_at(10) + report.recall_at(50)) / 2.0;
  }
  return report;
}

RetrievalReport evaluate(Composer& composer, const Dataset& ds, std::span<const TripletRecord> triplets,
                         const GalleryIndex& index, std::span<const std::size_t> ks) {
  const Tensor queries = compose_queries(composer, ds, triplets);
  std::vector<std::size_t> targets;
  targets.reserve(triplets.size());
  for (const auto& t : triplets) targets.push_back(t.target_id);
  return evaluate_features(queries, targets, index, ks);
}

double RetrievalReport::recall_at(std::size_t k) const {
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] == k) return recall[i];
  }
  throw ValidationError("recall@" + std::to_string(k) + " was not computed");
}

json RetrievalReport::to_json(bool with_ranks) const {
  json j{{"gallery_size", gallery_size}, {"queries", queries}};
  for (std::size_t i = 0; i < ks.size(); ++i) j["recall@" + std::to_string(ks[i])] = recall[i];
  j["composite"] = composite ? json(*composite) : json(nullptr);
  if (with_ranks) j["ranks"] = ranks;
  if (!echo.is_null()) j["config"] = echo;
  return j;
}

std::string RetrievalReport::csv_header() const {
  std::string out = "gallery_size,queries";
  for (std::size_t k : ks) out += ",recall@" + std::to_string(k);
  return out + ",composite";
}

std::string RetrievalReport::csv_row() const {
  std::ostringstream out;
  out.precision(17);
  out << gallery_size << ',' << queries;
  for (double r : recall) out << ',' << r;
  out << ',';
  if (composite) out << *composite;
  return out.str();
}

bool RetrievalReport::operator==(const RetrievalReport& o) const {
  return gallery_size == o.gallery_size && queries == o.queries && ks == o.ks && recall == o.recall &&
         composite == o.composite && ranks == o.ranks;
}

json summarize(std::span<const RetrievalReport> reports) {
  json out = json::object();
  if (reports.empty()) return out;
  std::map<std::string, std::vector<double>> columns;
  for (const auto& r : reports) {
    for (std::size_t i = 0; i < r.ks.size(); ++i) columns["recall@" + std::to_string(r.ks[i])].push_back(r.recall[i]);
    if (r.composite) columns["composite"].push_back(*r.composite);
  }
  for (const auto& [name, values] : columns) {
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    const double sd = values.size() > 1 ? std::sqrt(var / static_cast<double>(values.size() - 1)) : 0.0;
    out[name] = {{"mean", mean}, {"std", sd}, {"n", values.size()}};
  }
  return out;
}

}  // namespace cgl
