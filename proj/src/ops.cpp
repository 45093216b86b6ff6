// Copyright 2026 The cgl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgl/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cgl/error.hpp"
#include "linalg.hpp"

namespace cgl {

namespace {

using detail::Node;

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

bool wants_grad(const Node& self, std::size_t i) {
  return i < self.inputs.size() && self.inputs[i] && self.inputs[i]->requires_grad;
}

Node& input(Node& self, std::size_t i) { return *self.inputs[i]; }

}  // namespace

Var affine(const Var& input_var, const Var& weight) { return affine(input_var, weight, Var()); }

Var affine(const Var& input_var, const Var& weight, const Var& bias) {
  const Tensor& x = input_var.value();
  const Tensor& w = weight.value();
  require_matrix(x, "affine");
  require_matrix(w, "affine");
  if (x.cols() != w.rows()) {
    throw DimensionError("affine: input " + shape_string(x.shape()) + " vs weight " +
                         shape_string(w.shape()));
  }
  const std::size_t batch = x.rows();
  const std::size_t din = w.rows();
  const std::size_t dout = w.cols();
  if (bias.defined() && bias.value().shape() != Shape{dout}) {
    throw DimensionError("affine: bias " + shape_string(bias.value().shape()) + " for " +
                         std::to_string(dout) + " outputs");
  }
  Tensor out({batch, dout});
  linalg::gemm_nn(x.data(), w.data(), out.data(), batch, din, dout, false);
  if (bias.defined()) {
    const double* b = bias.value().data();
    for (std::size_t r = 0; r < batch; ++r) {
      double* row = out.data() + r * dout;
      for (std::size_t j = 0; j < dout; ++j) row[j] += b[j];
    }
  }
  return Var::from_op("affine", std::move(out), {input_var, weight, bias}, [=](Node& self) {
    const Tensor& g = self.grad;
    const Tensor& xv = input(self, 0).value;
    const Tensor& wv = input(self, 1).value;
    if (wants_grad(self, 0)) {
      linalg::gemm_nt(g.data(), wv.data(), detail::grad_slot(input(self, 0)).data(), batch, dout,
                      din, true);
    }
    if (wants_grad(self, 1)) {
      linalg::gemm_tn(xv.data(), g.data(), detail::grad_slot(input(self, 1)).data(), din, batch,
                      dout, true);
    }
    if (wants_grad(self, 2)) {
      double* gb = detail::grad_slot(input(self, 2)).data();
      for (std::size_t r = 0; r < batch; ++r) {
        const double* row = g.data() + r * dout;
        for (std::size_t j = 0; j < dout; ++j) gb[j] += row[j];
      }
    }
  });
}

Var matmul(const Var& a, const Var& b) { return affine(a, b); }

Var matmul_transposed(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix(av, "matmul_transposed");
  require_matrix(bv, "matmul_transposed");
  if (av.cols() != bv.cols()) {
    throw DimensionError("matmul_transposed: " + shape_string(av.shape()) + " vs " +
                         shape_string(bv.shape()));
  }
  const std::size_t m = av.rows();
  const std::size_t k = av.cols();
  const std::size_t n = bv.rows();
  Tensor out({m, n});
  linalg::gemm_nt(av.data(), bv.data(), out.data(), m, k, n, false);
  return Var::from_op("matmul_transposed", std::move(out), {a, b}, [=](Node& self) {
    const Tensor& g = self.grad;
    if (wants_grad(self, 0)) {
      linalg::gemm_nn(g.data(), input(self, 1).value.data(),
                      detail::grad_slot(input(self, 0)).data(), m, n, k, true);
    }
    if (wants_grad(self, 1)) {
      linalg::gemm_tn(g.data(), input(self, 0).value.data(),
                      detail::grad_slot(input(self, 1)).data(), n, m, k, true);
    }
  });
}

Var sparse_matmul(std::shared_ptr<const SparseOperator> lhs, const Var& x) {
  Tensor out = lhs->matrix().multiply(x.value());
  return Var::from_op("sparse_matmul", std::move(out), {x}, [lhs](Node& self) {
    detail::accumulate(input(self, 0), lhs->transposed().multiply(self.grad));
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  const double* bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return Var::from_op("add", std::move(out), {a, b}, [](Node& self) {
    if (wants_grad(self, 0)) detail::accumulate(input(self, 0), self.grad);
    if (wants_grad(self, 1)) detail::accumulate(input(self, 1), self.grad);
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  const double* bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return Var::from_op("mul", std::move(out), {a, b}, [](Node& self) {
    const Tensor& g = self.grad;
    for (std::size_t which = 0; which < 2; ++which) {
      if (!wants_grad(self, which)) continue;
      const Tensor& other = input(self, 1 - which).value;
      double* dst = detail::grad_slot(input(self, which)).data();
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * other[i];
    }
  });
}

Var scale(const Var& a, double factor) {
  Tensor out = a.value();
  for (double& v : out.values()) v *= factor;
  return Var::from_op("scale", std::move(out), {a}, [factor](Node& self) {
    double* dst = detail::grad_slot(input(self, 0)).data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) dst[i] += self.grad[i] * factor;
  });
}

Var scale_by(const Var& a, const Var& factor) {
  if (factor.value().size() != 1) {
    throw DimensionError("scale_by: factor must hold one element, got " +
                         shape_string(factor.value().shape()));
  }
  const double f = factor.value()[0];
  Tensor out = a.value();
  for (double& v : out.values()) v *= f;
  return Var::from_op("scale_by", std::move(out), {a, factor}, [](Node& self) {
    const Tensor& g = self.grad;
    const Tensor& av = input(self, 0).value;
    const double fv = input(self, 1).value[0];
    if (wants_grad(self, 0)) {
      double* dst = detail::grad_slot(input(self, 0)).data();
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * fv;
    }
    if (wants_grad(self, 1)) {
      double sum = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) sum += g[i] * av[i];
      detail::grad_slot(input(self, 1))[0] += sum;
    }
  });
}

Var interpolate(const Var& a, const Var& b, const Var& gate) {
  require_same_shape(a.value(), b.value(), "interpolate");
  require_same_shape(a.value(), gate.value(), "interpolate");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Tensor& sv = gate.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - sv[i]) * av[i] + sv[i] * bv[i];
  return Var::from_op("interpolate", std::move(out), {a, b, gate}, [](Node& self) {
    const Tensor& g = self.grad;
    const Tensor& x = input(self, 0).value;
    const Tensor& y = input(self, 1).value;
    const Tensor& s = input(self, 2).value;
    if (wants_grad(self, 0)) {
      double* dst = detail::grad_slot(input(self, 0)).data();
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * (1.0 - s[i]);
    }
    if (wants_grad(self, 1)) {
      double* dst = detail::grad_slot(input(self, 1)).data();
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * s[i];
    }
    if (wants_grad(self, 2)) {
      double* dst = detail::grad_slot(input(self, 2)).data();
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * (y[i] - x[i]);
    }
  });
}

Var leaky_relu(const Var& in, double slope) {
  if (!(slope >= 0.0 && slope < 1.0)) {
    throw ValidationError("leaky_relu slope must lie in [0, 1), got " + std::to_string(slope));
  }
  const Tensor& x = in.value();
  KinkProbe::record(x.values());
  Tensor out(x.shape());
  const double* xs = x.data();
  double* os = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) os[i] = xs[i] * (xs[i] >= 0.0 ? 1.0 : slope);
  return Var::from_op("leaky_relu", std::move(out), {in}, [slope](Node& self) {
    const Tensor& xv = input(self, 0).value;
    const double* xs = xv.data();
    const double* g = self.grad.data();
    double* dst = detail::grad_slot(input(self, 0)).data();
    for (std::size_t i = 0; i < xv.size(); ++i) dst[i] += g[i] * (xs[i] > 0.0 ? 1.0 : slope);
  });
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Var sigmoid(const Var& in) {
  const Tensor& x = in.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = stable_sigmoid(x[i]);
  Tensor saved = out;
  return Var::from_op("sigmoid", std::move(out), {in}, [saved = std::move(saved)](Node& self) {
    double* dst = detail::grad_slot(input(self, 0)).data();
    for (std::size_t i = 0; i < saved.size(); ++i) {
      dst[i] += self.grad[i] * saved[i] * (1.0 - saved[i]);
    }
  });
}

Var concat_features(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix(av, "concat_features");
  require_matrix(bv, "concat_features");
  if (av.rows() != bv.rows()) {
    throw DimensionError("concat_features: batch " + std::to_string(av.rows()) + " vs " +
                         std::to_string(bv.rows()));
  }
  const std::size_t rows = av.rows();
  const std::size_t wa = av.cols();
  const std::size_t wb = bv.cols();
  Tensor out({rows, wa + wb});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(av.row(r).begin(), av.row(r).end(), out.row(r).begin());
    std::copy(bv.row(r).begin(), bv.row(r).end(), out.row(r).begin() + wa);
  }
  return Var::from_op("concat_features", std::move(out), {a, b}, [=](Node& self) {
    const Tensor& g = self.grad;
    if (wants_grad(self, 0)) {
      Tensor& ga = detail::grad_slot(input(self, 0));
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < wa; ++j) ga.at(r, j) += g.at(r, j);
      }
    }
    if (wants_grad(self, 1)) {
      Tensor& gb = detail::grad_slot(input(self, 1));
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < wb; ++j) gb.at(r, j) += g.at(r, wa + j);
      }
    }
  });
}

Var l2_normalize_rows(const Var& in) {
  const Tensor& x = in.value();
  require_matrix(x, "l2_normalize_rows");
  const std::size_t rows = x.rows();
  const std::size_t cols = x.cols();
  Tensor out(x.shape());
  std::vector<double> norms(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double sq = 0.0;
    for (double v : x.row(r)) sq += v * v;
    const double norm = std::sqrt(sq);
    if (norm == 0.0) {
      throw NumericalError("l2_normalize_rows: row " + std::to_string(r) + " has zero norm");
    }
    norms[r] = norm;
    for (std::size_t j = 0; j < cols; ++j) out.at(r, j) = x.at(r, j) / norm;
  }
  Tensor unit = out;
  return Var::from_op("l2_normalize_rows", std::move(out), {in},
                      [unit = std::move(unit), norms = std::move(norms)](Node& self) {
                        const Tensor& g = self.grad;
                        Tensor& gx = detail::grad_slot(input(self, 0));
                        const std::size_t w = unit.cols();
                        for (std::size_t r = 0; r < unit.rows(); ++r) {
                          double dot = 0.0;
                          for (std::size_t j = 0; j < w; ++j) dot += unit.at(r, j) * g.at(r, j);
                          for (std::size_t j = 0; j < w; ++j) {
                            gx.at(r, j) += (g.at(r, j) - unit.at(r, j) * dot) / norms[r];
                          }
                        }
                      });
}

Var softmax_cross_entropy_rows(const Var& logits, std::span<const std::size_t> target_index) {
  const Tensor& z = logits.value();
  require_matrix(z, "softmax_cross_entropy_rows");
  const std::size_t rows = z.rows();
  const std::size_t cols = z.cols();
  if (target_index.size() != rows) {
    throw DimensionError("softmax_cross_entropy_rows: " + std::to_string(target_index.size()) +
                         " targets for " + std::to_string(rows) + " rows");
  }
  if (rows == 0) throw DimensionError("softmax_cross_entropy_rows: empty batch");
  std::vector<std::size_t> targets(target_index.begin(), target_index.end());
  Tensor probs(z.shape());
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] >= cols) throw DimensionError("softmax_cross_entropy_rows: target out of range");
    auto row = z.row(r);
    const double peak = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      probs.at(r, j) = std::exp(row[j] - peak);
      sum += probs.at(r, j);
    }
    for (std::size_t j = 0; j < cols; ++j) probs.at(r, j) /= sum;
    total += peak + std::log(sum) - row[targets[r]];
  }
  Tensor out = Tensor::scalar(total / static_cast<double>(rows));
  return Var::from_op(
      "softmax_cross_entropy_rows", std::move(out), {logits},
      [probs = std::move(probs), targets = std::move(targets)](Node& self) {
        const double upstream = self.grad[0] / static_cast<double>(probs.rows());
        Tensor& gz = detail::grad_slot(input(self, 0));
        for (std::size_t r = 0; r < probs.rows(); ++r) {
          for (std::size_t j = 0; j < probs.cols(); ++j) {
            const double onehot = j == targets[r] ? 1.0 : 0.0;
            gz.at(r, j) += upstream * (probs.at(r, j) - onehot);
          }
        }
      });
}

Var bce_with_logits(const Var& logits, const Tensor& targets) {
  const Tensor& z = logits.value();
  require_same_shape(z, targets, "bce_with_logits");
  if (z.size() == 0) throw DimensionError("bce_with_logits: empty input");
  for (double t : targets.values()) {
    if (t != 0.0 && t != 1.0) throw ValidationError("bce_with_logits: targets must be 0 or 1");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double x = z[i];
    total += std::max(x, 0.0) - x * targets[i] + std::log1p(std::exp(-std::abs(x)));
  }
  const double count = static_cast<double>(z.size());
  Tensor out = Tensor::scalar(total / count);
  return Var::from_op("bce_with_logits", std::move(out), {logits},
                      [targets, count](Node& self) {
                        const Tensor& x = input(self, 0).value;
                        const double upstream = self.grad[0] / count;
                        double* dst = detail::grad_slot(input(self, 0)).data();
                        for (std::size_t i = 0; i < x.size(); ++i) {
                          dst[i] += upstream * (stable_sigmoid(x[i]) - targets[i]);
                        }
                      });
}

Var weighted_sum(const Var& in, const Tensor& weights) {
  require_same_shape(in.value(), weights, "weighted_sum");
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) total += in.value()[i] * weights[i];
  return Var::from_op("weighted_sum", Tensor::scalar(total), {in}, [weights](Node& self) {
    const double upstream = self.grad[0];
    double* dst = detail::grad_slot(input(self, 0)).data();
    for (std::size_t i = 0; i < weights.size(); ++i) dst[i] += upstream * weights[i];
  });
}

}  // namespace cgl
