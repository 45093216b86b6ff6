// Copyright 2026 The cgl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cgl/data.hpp"
#include "cgl/sparse.hpp"
#include "cgl/tensor.hpp"

namespace cgl {

enum class MatrixState { kRaw, kBinarized, kReweighted, kNormalized };

std::string to_string(MatrixState state);

/// Dense N x N node-pair matrix tagged with its position in the
/// raw -> binarized -> reweighted -> normalized pipeline.
class CorrelationMatrix {
 public:
  CorrelationMatrix() = default;
  CorrelationMatrix(MatrixState state, Tensor values);

  std::size_t n() const { return values_.empty() ? 0 : values_.rows(); }
  MatrixState state() const noexcept { return state_; }
  const Tensor& values() const noexcept { return values_; }
  double at(std::size_t i, std::size_t j) const { return values_.at(i, j); }

  /// Throws ValidationError unless the matrix is in `expected` state.
  void require(MatrixState expected, std::string_view op) const;

 private:
  MatrixState state_ = MatrixState::kRaw;
  Tensor values_;
};

struct RawCorrelations {
  CorrelationMatrix matrix;
  std::size_t zero_rows = 0;  // rows with zero norm, given 0 off-diagonal similarity
};

/// Cosine similarity of every pair of rows, clamped to [-1, 1], with an exact unit diagonal.
RawCorrelations target_correlations(const Tensor& target_features);

struct TauChoice {
  double tau = 1.0;
  double mean_degree = 0.0;  // off-diagonal entries >= tau per node
  double target_degree = 0.0;
  bool nearest_neighbor_fallback = false;  // density * N < 1
  bool budget_exceeded = false;            // ties at similarity 1 cannot be split
};

/// Smallest observed off-diagonal value whose activation count stays within
/// density * N per node on average. When every candidate overshoots (ties), the
/// threshold is placed just above the largest value.
TauChoice choose_tau(const CorrelationMatrix& raw, double density = 0.15);

CorrelationMatrix binarize(const CorrelationMatrix& raw, double tau);

/// Off-diagonal ones become 0.33 / deg(i); isolated rows become the unit basis row.
CorrelationMatrix reweight(const CorrelationMatrix& binarized);

inline constexpr double kNeighborMass = 0.33;

enum class Normalization {
  kSymmetric,  // D^-1/2 A D^-1/2
  kPrinted,    // D^1/2 A D^-1/2
};

std::string to_string(Normalization form);
Normalization normalization_from_string(const std::string& name);

/// D is the diagonal of row sums of the reweighted matrix.
CorrelationMatrix normalize(const CorrelationMatrix& reweighted,
                            Normalization form = Normalization::kSymmetric);

struct GraphOptions {
  double density = 0.15;
  Normalization normalization = Normalization::kSymmetric;
};

/// Everything the GCN stream needs from graph construction.
struct GraphBundle {
  std::size_t n = 0;
  std::size_t d_v = 0;
  std::size_t d_t = 0;
  double tau = 0.0;
  double density = 0.0;
  double mean_degree = 0.0;
  Normalization normalization = Normalization::kSymmetric;
  std::string fingerprint;
  Tensor node_features;      // H: [N x (D_V + D_T)], row i = v_src(i) ++ t(i)
  SparseMatrix lambda_hat;   // normalized
  SparseMatrix lambda_prime; // binarized, kept for pseudo-labels
  std::vector<std::string> warnings;

  bool operator==(const GraphBundle& other) const;
};

/// Hash of the encoder tables and training triplets of a dataset.
std::string dataset_fingerprint(const Dataset& dataset);
/// "<dataset hash>-<checkpoint hash>"
std::string graph_fingerprint(const Dataset& dataset, std::string_view checkpoint_hash);
/// Dataset half of a graph fingerprint.
std::string fingerprint_dataset_part(std::string_view fingerprint);

/// Builds the graph over the training triplets (node i = triplet key i).
GraphBundle build_graph(const Dataset& dataset, std::string_view checkpoint_hash,
                        const GraphOptions& options = {});

std::string serialize_graph(const GraphBundle& bundle);
GraphBundle parse_graph(std::string data, const std::string& source);
void write_graph(const GraphBundle& bundle, const std::filesystem::path& path);
GraphBundle read_graph(const std::filesystem::path& path);

}  // namespace cgl
