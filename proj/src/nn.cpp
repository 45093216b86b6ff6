// Copyright 2026 The cgl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgl/nn.hpp"

#include <cmath>

#include "cgl/error.hpp"
#include "cgl/ops.hpp"

namespace cgl {

std::vector<Parameter*> Module::parameters() {
  std::vector<Parameter*> out;
  collect_parameters(out);
  return out;
}

std::vector<BufferRef> Module::buffers() {
  std::vector<BufferRef> out;
  collect_buffers(out);
  return out;
}

Linear::Linear(const std::string& name, std::size_t in, std::size_t out, bool with_bias,
               Rng& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(in));
  Tensor w({in, out});
  for (double& v : w.values()) v = rng.uniform(-bound, bound);
  weight = Parameter(name + ".weight", std::move(w));
  if (with_bias) bias = Parameter(name + ".bias", Tensor({out}));
}

Var Linear::forward(const Var& input) const {
  return bias.var.defined() ? affine(input, weight.var, bias.var) : affine(input, weight.var);
}

void Linear::collect_parameters(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  if (bias.var.defined()) out.push_back(&bias);
}

BatchNormState::BatchNormState(const std::string& name, std::size_t features, double momentum_,
                               double eps_)
    : gamma(name + ".gamma", Tensor({features}, 1.0)),
      beta(name + ".beta", Tensor({features}, 0.0)),
      running_mean({features}, 0.0),
      running_var({features}, 1.0),
      momentum(momentum_),
      eps(eps_) {}

Var batch_norm(const Var& input, BatchNormState& state) {
  const Tensor& x = input.value();
  if (x.rank() != 2 || x.cols() != state.features()) {
    throw DimensionError("batch_norm: input " + shape_string(x.shape()) + " for " +
                         std::to_string(state.features()) + " features");
  }
  const std::size_t rows = x.rows();
  const std::size_t cols = x.cols();
  const Tensor& gamma = state.gamma.var.value();
  const Tensor& beta = state.beta.var.value();

  Tensor mean({cols});
  Tensor var({cols});
  const bool training = state.mode == Mode::kTrain;
  if (training) {
    if (rows < 2) throw ValidationError("batch_norm: degenerate batch of size 1 in train mode");
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < cols; ++j) mean[j] += x.at(r, j);
    }
    for (std::size_t j = 0; j < cols; ++j) mean[j] /= static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < cols; ++j) {
        const double d = x.at(r, j) - mean[j];
        var[j] += d * d;
      }
    }
    for (std::size_t j = 0; j < cols; ++j) var[j] /= static_cast<double>(rows);
    const double unbias = static_cast<double>(rows) / static_cast<double>(rows - 1);
    for (std::size_t j = 0; j < cols; ++j) {
      state.running_mean[j] = (1.0 - state.momentum) * state.running_mean[j] + state.momentum * mean[j];
      state.running_var[j] =
          (1.0 - state.momentum) * state.running_var[j] + state.momentum * var[j] * unbias;
    }
  } else {
    mean = state.running_mean;
    var = state.running_var;
  }

  std::vector<double> inv_std(cols);
  for (std::size_t j = 0; j < cols; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] + state.eps);
  Tensor xhat(x.shape());
  Tensor out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < cols; ++j) {
      const double h = (x.at(r, j) - mean[j]) * inv_std[j];
      xhat.at(r, j) = h;
      out.at(r, j) = gamma[j] * h + beta[j];
    }
  }

  return Var::from_op(
      "batch_norm", std::move(out), {input, state.gamma.var, state.beta.var},
      [xhat = std::move(xhat), inv_std = std::move(inv_std), training](detail::Node& self) {
        const Tensor& g = self.grad;
        const std::size_t n = xhat.rows();
        const std::size_t w = xhat.cols();
        std::vector<double> sum_g(w, 0.0);
        std::vector<double> sum_gx(w, 0.0);
        for (std::size_t r = 0; r < n; ++r) {
          for (std::size_t j = 0; j < w; ++j) {
            sum_g[j] += g.at(r, j);
            sum_gx[j] += g.at(r, j) * xhat.at(r, j);
          }
        }
        detail::Node& in = *self.inputs[0];
        detail::Node& gamma_node = *self.inputs[1];
        detail::Node& beta_node = *self.inputs[2];
        if (in.requires_grad) {
          Tensor& gx = detail::grad_slot(in);
          const Tensor& gm = gamma_node.value;
          const double count = static_cast<double>(n);
          for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t j = 0; j < w; ++j) {
              const double scale = gm[j] * inv_std[j];
              if (training) {
                gx.at(r, j) += scale / count *
                               (count * g.at(r, j) - sum_g[j] - xhat.at(r, j) * sum_gx[j]);
              } else {
                gx.at(r, j) += scale * g.at(r, j);
              }
            }
          }
        }
        if (gamma_node.requires_grad) {
          Tensor& gg = detail::grad_slot(gamma_node);
          for (std::size_t j = 0; j < w; ++j) gg[j] += sum_gx[j];
        }
        if (beta_node.requires_grad) {
          Tensor& gb = detail::grad_slot(beta_node);
          for (std::size_t j = 0; j < w; ++j) gb[j] += sum_g[j];
        }
      });
}

void BatchNorm::collect_parameters(std::vector<Parameter*>& out) {
  out.push_back(&state.gamma);
  out.push_back(&state.beta);
}

void BatchNorm::collect_buffers(std::vector<BufferRef>& out) {
  const std::string base = state.gamma.name.substr(0, state.gamma.name.size() - 6);
  out.push_back({base + ".running_mean", &state.running_mean});
  out.push_back({base + ".running_var", &state.running_var});
}

}  // namespace cgl
