// Copyright 2026 The cgl Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "cgl/error.hpp"
#include "cgl/evaluator.hpp"
#include "test_util.hpp"

namespace cgl {
namespace {

using testing::cosine;
using testing::kPropertySeeds;
using testing::random_matrix;

// Full sort of the gallery per query; ties go to the smaller id.
std::vector<std::size_t> sort_ranks(const Tensor& queries, const std::vector<std::size_t>& targets,
                                    const Tensor& gallery) {
  std::vector<std::size_t> ranks;
  for (std::size_t i = 0; i < queries.rows(); ++i) {
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t r = 0; r < gallery.rows(); ++r) {
      scored.emplace_back(cosine(queries.row(i), gallery.row(r)), r);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    for (std::size_t p = 0; p < scored.size(); ++p) {
      if (scored[p].second == targets[i]) ranks.push_back(p + 1);
    }
  }
  return ranks;
}

TEST(Recall, MatchesFullSortOracle) {
  for (std::uint64_t seed = 0; seed < kPropertySeeds; ++seed) {
    Rng rng(seed);
    const std::size_t g = 8 + seed * 3;
    const Tensor gallery = random_matrix(g, 6, rng);
    // Queries near their target, so ranks spread over small values.
    Tensor queries = random_matrix(32, 6, rng, 0.8);
    std::vector<std::size_t> targets;
    for (std::size_t i = 0; i < 32; ++i) {
      targets.push_back(rng.below(g));
      for (std::size_t j = 0; j < 6; ++j) queries.at(i, j) += gallery.at(targets.back(), j);
    }
    const std::vector<std::size_t> ks{1, 2, 5, 10};
    const RetrievalReport r = evaluate_features(queries, targets, build_index(gallery), ks);
    const auto oracle = sort_ranks(queries, targets, gallery);
    EXPECT_EQ(r.ranks, oracle) << "seed " << seed;
    for (std::size_t i = 0; i < ks.size(); ++i) {
      const auto hits = std::count_if(oracle.begin(), oracle.end(), [&](std::size_t x) { return x <= ks[i]; });
      EXPECT_NEAR(r.recall[i], 100.0 * static_cast<double>(hits) / 32.0, 1e-10);
    }
  }
}

TEST(Recall, TiesGoToSmallerId) {
  const Tensor gallery = Tensor::matrix({{1, 0}, {2, 0}, {0, 1}});
  const Tensor queries = Tensor::matrix({{1, 0}, {1, 0}});
  const std::vector<std::size_t> targets{0, 1};
  const std::vector<std::size_t> ks{1};
  const RetrievalReport r = evaluate_features(queries, targets, build_index(gallery), ks);
  EXPECT_EQ(r.ranks, (std::vector<std::size_t>{1, 2}));
  EXPECT_DOUBLE_EQ(r.recall[0], 50.0);
}

TEST(Recall, TargetFeaturesAsQueriesArePerfect) {
  Rng rng(2);
  const Tensor gallery = random_matrix(60, 8, rng);
  std::vector<std::size_t> targets(60);
  std::iota(targets.begin(), targets.end(), 0);
  const RetrievalReport r = evaluate_features(gallery, targets, build_index(gallery), {});
  EXPECT_EQ(r.ks, (std::vector<std::size_t>{1, 5, 10, 50}));
  EXPECT_DOUBLE_EQ(r.recall_at(1), 100.0);
  ASSERT_TRUE(r.composite.has_value());
  EXPECT_DOUBLE_EQ(*r.composite, 100.0);
}

TEST(Recall, RandomQueriesNearChance) {
  Rng rng(9);
  const std::size_t g = 20;
  const Tensor gallery = random_matrix(g, 8, rng);
  const Tensor queries = random_matrix(1000, 8, rng);
  std::vector<std::size_t> targets;
  for (std::size_t i = 0; i < 1000; ++i) targets.push_back(rng.below(g));
  const std::vector<std::size_t> ks{1};
  const RetrievalReport r = evaluate_features(queries, targets, build_index(gallery), ks);
  // 100/G = 5 percent; binomial std over 1000 queries is about 0.7.
  EXPECT_NEAR(r.recall[0], 5.0, 3.0);
}

TEST(Recall, MonotoneInK) {
  for (std::uint64_t seed = 0; seed < kPropertySeeds; ++seed) {
    Rng rng(seed + 100);
    const Tensor gallery = random_matrix(70, 5, rng);
    const Tensor queries = random_matrix(40, 5, rng);
    std::vector<std::size_t> targets;
    for (std::size_t i = 0; i < 40; ++i) targets.push_back(rng.below(70));
    const RetrievalReport r = evaluate_features(queries, targets, build_index(gallery), {});
    for (std::size_t i = 1; i < r.recall.size(); ++i) EXPECT_LE(r.recall[i - 1], r.recall[i]);
    EXPECT_DOUBLE_EQ(*r.composite, (r.recall_at(10) + r.recall_at(50)) / 2.0);
  }
}

TEST(Recall, CompositeNeedsFiftyItems) {
  Rng rng(1);
  const Tensor gallery = random_matrix(49, 4, rng);
  const std::vector<std::size_t> targets{3};
  const RetrievalReport r = evaluate_features(random_matrix(1, 4, rng), targets, build_index(gallery), {});
  EXPECT_EQ(r.ks, (std::vector<std::size_t>{1, 5, 10}));
  EXPECT_FALSE(r.composite.has_value());
  EXPECT_THROW(r.recall_at(50), ValidationError);
}

TEST(Index, RowsAreUnitNorm) {
  Rng rng(4);
  const GalleryIndex index = build_index(random_matrix(30, 7, rng, 5.0));
  for (std::size_t r = 0; r < index.size(); ++r) {
    double n = 0;
    for (double v : index.features.row(r)) n += v * v;
    EXPECT_NEAR(n, 1.0, 1e-12);
    EXPECT_EQ(index.ids[r], r);
  }
}

TEST(Index, ZeroRowIsNumericalError) {
  Tensor t({3, 2});
  t.at(0, 0) = 1.0;
  t.at(2, 1) = 1.0;
  EXPECT_THROW(build_index(t), NumericalError);
}

TEST(Recall, InputErrors) {
  Rng rng(0);
  const GalleryIndex index = build_index(random_matrix(10, 4, rng));
  const std::vector<std::size_t> one{0};
  const std::vector<std::size_t> missing{10};
  EXPECT_THROW(evaluate_features(random_matrix(2, 4, rng), one, index, {}), DimensionError);
  EXPECT_THROW(evaluate_features(random_matrix(1, 5, rng), one, index, {}), DimensionError);
  EXPECT_THROW(evaluate_features(random_matrix(1, 4, rng), missing, index, {}), ValidationError);
}

TEST(Summary, MeanAndSampleStd) {
  std::vector<RetrievalReport> reports(3);
  const double values[3] = {10.0, 20.0, 60.0};
  for (std::size_t i = 0; i < 3; ++i) {
    reports[i].ks = {1};
    reports[i].recall = {values[i]};
  }
  const auto s = summarize(reports);
  EXPECT_DOUBLE_EQ(s["recall@1"]["mean"].get<double>(), 30.0);
  EXPECT_NEAR(s["recall@1"]["std"].get<double>(), std::sqrt(700.0), 1e-12);
  EXPECT_EQ(s["recall@1"]["n"].get<std::size_t>(), 3u);
  EXPECT_FALSE(s.contains("composite"));
}

TEST(Report, CsvAndJson) {
  RetrievalReport r;
  r.gallery_size = 60;
  r.queries = 4;
  r.ks = {1, 10, 50};
  r.recall = {25.0, 50.0, 75.0};
  r.composite = 62.5;
  r.ranks = {1, 3, 20, 60};
  EXPECT_EQ(r.csv_header(), "gallery_size,queries,recall@1,recall@10,recall@50,composite");
  EXPECT_EQ(r.csv_row(), "60,4,25,50,75,62.5");
  const auto j = r.to_json();
  EXPECT_EQ(j["recall@10"].get<double>(), 50.0);
  EXPECT_EQ(j["ranks"].size(), 4u);
  EXPECT_FALSE(r.to_json(false).contains("ranks"));
}

}  // namespace
}  // namespace cgl
