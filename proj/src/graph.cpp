// Copyright 2026 The cgl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgl/graph.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "cgl/error.hpp"
#include "cgl/io.hpp"
#include "linalg.hpp"

namespace cgl {

std::string to_string(MatrixState state) {
  switch (state) {
    case MatrixState::kRaw: return "raw";
    case MatrixState::kBinarized: return "binarized";
    case MatrixState::kReweighted: return "reweighted";
    case MatrixState::kNormalized: return "normalized";
  }
  return "?";
}

CorrelationMatrix::CorrelationMatrix(MatrixState state, Tensor values)
    : state_(state), values_(std::move(values)) {
  if (values_.rank() != 2 || values_.rows() != values_.cols()) {
    throw DimensionError("correlation matrix must be square, got " + shape_string(values_.shape()));
  }
}

void CorrelationMatrix::require(MatrixState expected, std::string_view op) const {
  if (state_ != expected) {
    throw ValidationError(std::string(op) + " expects a " + to_string(expected) + " matrix, got " +
                          to_string(state_));
  }
}

RawCorrelations target_correlations(const Tensor& features) {
  if (features.rank() != 2) throw DimensionError("target features must be a matrix");
  const std::size_t n = features.rows();
  const std::size_t d = features.cols();
  if (n < 2) throw ValidationError("correlation matrix needs at least 2 nodes");

  RawCorrelations out;
  Tensor unit = features;
  std::vector<bool> zero(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = unit.row(i);
    double sq = 0.0;
    for (double v : r) sq += v * v;
    if (sq == 0.0) {
      zero[i] = true;
      ++out.zero_rows;
      continue;
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (double& v : r) v *= inv;
  }
  Tensor lambda({n, n});
  linalg::gemm_nt(unit.data(), unit.data(), lambda.data(), n, d, n, false);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double v = std::clamp(lambda.at(i, j), -1.0, 1.0);
      if (i == j) v = 1.0;
      else if (zero[i] || zero[j]) v = 0.0;
      lambda.at(i, j) = v;
      lambda.at(j, i) = v;
    }
  }
  out.matrix = CorrelationMatrix(MatrixState::kRaw, std::move(lambda));
  return out;
}

TauChoice choose_tau(const CorrelationMatrix& raw, double density) {
  raw.require(MatrixState::kRaw, "choose_tau");
  if (!(density > 0.0 && density < 1.0)) throw ValidationError("density must lie in (0, 1)");
  const std::size_t n = raw.n();
  const Tensor& m = raw.values();

  std::vector<double> off;
  off.reserve(n * (n - 1));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) off.push_back(m.at(i, j));
    }
  }
  std::sort(off.begin(), off.end(), std::greater<>());

  TauChoice choice;
  const double nd = static_cast<double>(n);
  choice.target_degree = density * nd;
  if (choice.target_degree < 1.0) {
    choice.target_degree = 1.0;
    choice.nearest_neighbor_fallback = true;
  }
  const double budget = choice.target_degree * nd;

  // Walk the distinct values in descending order; count(>= v) is the index
  // just past the last copy of v.
  std::size_t taken = 0;
  bool found = false;
  for (std::size_t k = 0; k < off.size();) {
    std::size_t end = k;
    while (end < off.size() && off[end] == off[k]) ++end;
    if (static_cast<double>(end) > budget) break;
    choice.tau = off[k];
    taken = end;
    found = true;
    k = end;
  }
  if (!found) {
    // Even the top tie exceeds the budget. Below 1 the threshold moves just
    // above it and no edge survives; at 1 (identical targets) a threshold
    // above 1 is invalid, so the tie is kept and the budget is exceeded.
    if (off.front() >= 1.0) {
      choice.tau = 1.0;
      taken = static_cast<std::size_t>(std::count_if(off.begin(), off.end(), [](double v) { return v >= 1.0; }));
      choice.budget_exceeded = true;
    } else {
      choice.tau = std::nextafter(off.front(), std::numeric_limits<double>::infinity());
      taken = 0;
    }
  }
  choice.mean_degree = static_cast<double>(taken) / nd;
  return choice;
}

CorrelationMatrix binarize(const CorrelationMatrix& raw, double tau) {
  raw.require(MatrixState::kRaw, "binarize");
  if (!(tau <= 1.0)) throw ValidationError("threshold must not exceed 1, got " + std::to_string(tau));
  const std::size_t n = raw.n();
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) = (i == j || raw.at(i, j) >= tau) ? 1.0 : 0.0;
  }
  return {MatrixState::kBinarized, std::move(out)};
}

CorrelationMatrix reweight(const CorrelationMatrix& binarized) {
  binarized.require(MatrixState::kBinarized, "reweight");
  const std::size_t n = binarized.n();
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t degree = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && binarized.at(i, j) != 0.0) ++degree;
    }
    out.at(i, i) = 1.0;
    if (degree == 0) continue;
    const double w = kNeighborMass / static_cast<double>(degree);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && binarized.at(i, j) != 0.0) out.at(i, j) = w;
    }
  }
  return {MatrixState::kReweighted, std::move(out)};
}

std::string to_string(Normalization form) {
  return form == Normalization::kSymmetric ? "symmetric" : "printed";
}

Normalization normalization_from_string(const std::string& name) {
  if (name == "symmetric") return Normalization::kSymmetric;
  if (name == "printed") return Normalization::kPrinted;
  throw ValidationError("unknown normalization '" + name + "', expected symmetric or printed");
}

CorrelationMatrix normalize(const CorrelationMatrix& reweighted, Normalization form) {
  reweighted.require(MatrixState::kReweighted, "normalize");
  const std::size_t n = reweighted.n();
  std::vector<double> left(n);
  std::vector<double> right(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) sum += reweighted.at(i, j);
    if (!(sum > 0.0)) throw NumericalError("row " + std::to_string(i) + " has a non-positive degree");
    right[i] = 1.0 / std::sqrt(sum);
    left[i] = form == Normalization::kSymmetric ? right[i] : std::sqrt(sum);
  }
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) = left[i] * reweighted.at(i, j) * right[j];
  }
  return {MatrixState::kNormalized, std::move(out)};
}

// ---------------------------------------------------------------------------
// Bundle

bool GraphBundle::operator==(const GraphBundle& o) const {
  return n == o.n && d_v == o.d_v && d_t == o.d_t && tau == o.tau && density == o.density &&
         mean_degree == o.mean_degree && normalization == o.normalization && fingerprint == o.fingerprint &&
         node_features == o.node_features && lambda_hat == o.lambda_hat && lambda_prime == o.lambda_prime;
}

std::string dataset_fingerprint(const Dataset& ds) {
  io::ByteWriter w;
  w.tensor(ds.encoders.image_projection);
  w.tensor(ds.encoders.item_noise);
  w.tensor(ds.encoders.text_projection);
  w.str(triplets_jsonl(ds.train, "train", ds.config));
  return io::sha256_hex(w.buffer()).substr(0, 16);
}

std::string graph_fingerprint(const Dataset& ds, std::string_view checkpoint_hash) {
  return dataset_fingerprint(ds) + "-" + std::string(checkpoint_hash.substr(0, 16));
}

std::string fingerprint_dataset_part(std::string_view fingerprint) {
  return std::string(fingerprint.substr(0, fingerprint.find('-')));
}

GraphBundle build_graph(const Dataset& ds, std::string_view checkpoint_hash, const GraphOptions& options) {
  const std::size_t n = ds.train.size();
  if (n < 2) throw ValidationError("graph needs at least 2 training triplets");
  const Tensor items = encode_items(ds);
  const Tensor texts = encode_texts(ds, ds.train);
  const std::size_t dv = items.cols();
  const std::size_t dt = texts.cols();

  GraphBundle b;
  b.n = n;
  b.d_v = dv;
  b.d_t = dt;
  b.density = options.density;
  b.normalization = options.normalization;
  b.fingerprint = graph_fingerprint(ds, checkpoint_hash);
  b.node_features = Tensor({n, dv + dt});
  Tensor omega({n, dv});
  for (std::size_t i = 0; i < n; ++i) {
    const TripletRecord& t = ds.train[i];
    auto src = items.row(t.source_id);
    auto h = b.node_features.row(i);
    std::copy(src.begin(), src.end(), h.begin());
    auto txt = texts.row(i);
    std::copy(txt.begin(), txt.end(), h.begin() + static_cast<std::ptrdiff_t>(dv));
    auto trg = items.row(t.target_id);
    std::copy(trg.begin(), trg.end(), omega.row(i).begin());
  }

  RawCorrelations raw = target_correlations(omega);
  if (raw.zero_rows) b.warnings.push_back(std::to_string(raw.zero_rows) + " zero-norm target features");
  const TauChoice tau = choose_tau(raw.matrix, options.density);
  if (tau.nearest_neighbor_fallback) {
    b.warnings.push_back("density * N < 1; using one neighbor per node on average");
  }
  if (tau.budget_exceeded) b.warnings.push_back("identical targets exceed the edge budget; all kept");
  b.tau = tau.tau;
  b.mean_degree = tau.mean_degree;
  const CorrelationMatrix prime = binarize(raw.matrix, tau.tau);
  const CorrelationMatrix hat = normalize(reweight(prime), options.normalization);
  b.lambda_prime = SparseMatrix::from_dense(prime.values());
  b.lambda_hat = SparseMatrix::from_dense(hat.values());
  return b;
}

namespace {

constexpr std::string_view kGraphMagic = "CGLG";
constexpr std::uint32_t kGraphVersion = 1;

void write_sparse(io::ByteWriter& w, const SparseMatrix& m) {
  const auto coo = m.to_coo();
  w.u64(coo.size());
  for (const CooEntry& e : coo) {
    w.u64(e.row);
    w.u64(e.col);
    w.f64(e.value);
  }
}

SparseMatrix read_sparse(io::ByteReader& r, std::size_t n, const std::string& source) {
  const std::uint64_t count = r.u64();
  if (count > n * n) throw ValidationError(source + ": sparse entry count exceeds N^2");
  std::vector<CooEntry> coo;
  coo.reserve(count);
  for (std::uint64_t k = 0; k < count; ++k) {
    CooEntry e{r.u64(), r.u64(), r.f64()};
    if (e.row >= n || e.col >= n) throw ValidationError(source + ": sparse index out of range");
    coo.push_back(e);
  }
  return SparseMatrix::from_coo(n, n, coo);
}

}  // namespace

std::string serialize_graph(const GraphBundle& b) {
  io::ByteWriter w;
  w.bytes(kGraphMagic);
  w.u32(kGraphVersion);
  w.u64(b.n);
  w.u64(b.d_v);
  w.u64(b.d_t);
  w.f64(b.tau);
  w.f64(b.density);
  w.f64(b.mean_degree);
  w.u32(b.normalization == Normalization::kSymmetric ? 0 : 1);
  w.str(b.fingerprint);
  w.tensor(b.node_features);
  write_sparse(w, b.lambda_hat);
  write_sparse(w, b.lambda_prime);
  return w.buffer();
}

GraphBundle parse_graph(std::string data, const std::string& source) {
  io::ByteReader r(std::move(data), source);
  if (r.bytes(4) != kGraphMagic) throw ValidationError(source + ": not a graph bundle");
  const std::uint32_t version = r.u32();
  if (version != kGraphVersion) {
    throw ValidationError(source + ": unsupported graph version " + std::to_string(version));
  }
  GraphBundle b;
  b.n = r.u64();
  b.d_v = r.u64();
  b.d_t = r.u64();
  b.tau = r.f64();
  b.density = r.f64();
  b.mean_degree = r.f64();
  b.normalization = r.u32() == 0 ? Normalization::kSymmetric : Normalization::kPrinted;
  b.fingerprint = r.str();
  b.node_features = r.tensor();
  if (b.node_features.rank() != 2 || b.node_features.rows() != b.n ||
      b.node_features.cols() != b.d_v + b.d_t) {
    throw ValidationError(source + ": node feature matrix does not match the header");
  }
  b.lambda_hat = read_sparse(r, b.n, source);
  b.lambda_prime = read_sparse(r, b.n, source);
  if (!r.at_end()) throw ValidationError(source + ": trailing bytes");
  return b;
}

void write_graph(const GraphBundle& bundle, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_graph(bundle));
}

GraphBundle read_graph(const std::filesystem::path& path) {
  return parse_graph(io::read_file(path), path.string());
}

}  // namespace cgl
