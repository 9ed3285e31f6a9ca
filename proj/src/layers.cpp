// Copyright 2026 The PoseNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "posenet/layers.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace posenet {

PositionEncoding position_encoding(std::int64_t max_length, std::int64_t depth) {
  if (depth <= 0 || depth % 2 != 0) {
    throw std::invalid_argument("position encoding depth must be positive and even, got " + std::to_string(depth));
  }
  if (max_length < 0) throw std::invalid_argument("position encoding length must be non-negative");
  std::vector<double> table(static_cast<std::size_t>(max_length * depth));
  for (std::int64_t pos = 0; pos < max_length; ++pos) {
    for (std::int64_t i = 0; i < depth / 2; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * i) / static_cast<double>(depth));
      const double angle = static_cast<double>(pos) * freq;
      table[static_cast<std::size_t>(pos * depth + 2 * i)] = std::sin(angle);
      table[static_cast<std::size_t>(pos * depth + 2 * i + 1)] = std::cos(angle);
    }
  }
  return {max_length, depth, Tensor({max_length, depth}, std::move(table))};
}

Tensor add_timing(const Tensor& x, const PositionEncoding& pe) {
  if (x.rank() != 3 || x.dim(2) != pe.depth) {
    throw std::invalid_argument("add_timing input " + shape_string(x.shape()) + " does not match depth " +
                                std::to_string(pe.depth));
  }
  const auto n = x.dim(1);
  if (n > pe.max_length) {
    throw std::invalid_argument("sequence length " + std::to_string(n) + " exceeds position table length " +
                                std::to_string(pe.max_length));
  }
  const auto d = pe.depth;
  const auto rows = x.dim(0);
  const auto table = pe.table.data();
  const auto xs = x.data();
  std::vector<double> y(xs.begin(), xs.end());
  for (std::int64_t r = 0; r < rows; ++r) {
    double* yr = y.data() + r * n * d;
    for (std::int64_t i = 0; i < n * d; ++i) yr[i] += table[static_cast<std::size_t>(i)];
  }
  auto xi = x.impl();
  return detail::make_result("add_timing", x.shape(), std::move(y), {&x}, [xi](const TensorImpl& o) {
    if (!xi->requires_grad) return;
    auto& g = detail::grad_buffer(*xi);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
  });
}

Tensor ffn_apply(const Tensor& x, const FFNParams& params) {
  if (params.weights.empty() || params.weights.size() != params.biases.size()) {
    throw std::invalid_argument("ffn needs matching, non-empty weight and bias lists");
  }
  Tensor h = x;
  for (std::size_t j = 0; j < params.weights.size(); ++j) {
    if (j > 0) h = ops::relu(h);
    h = ops::add(ops::matmul(h, params.weights[j]), params.biases[j]);
  }
  return h;
}

Tensor attention(const Tensor& memory, const Tensor& query, const Mask* mask) {
  if (memory.rank() != 3 || query.rank() != 3 || memory.dim(0) != query.dim(0) || memory.dim(2) != query.dim(2)) {
    throw std::invalid_argument("attention expects S [b, n, d] and T [b, m, d], got " +
                                shape_string(memory.shape()) + " and " + shape_string(query.shape()));
  }
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(memory.dim(2)));
  auto logits = ops::scale(ops::matmul(query, ops::transpose_last_two(memory)), inv_sqrt_d);
  auto weights = mask != nullptr ? ops::softmax(logits, *mask) : ops::softmax(logits);
  return ops::matmul(weights, memory);
}

Tensor multi_head_attention(const Tensor& memory, const Tensor& query, const Mask* mask, const AttentionConfig& cfg,
                            const AttentionParams& params) {
  const auto d = query.dim(-1);
  if (cfg.heads < 1 || d % cfg.heads != 0) {
    throw std::invalid_argument("depth " + std::to_string(d) + " is not divisible by " +
                                std::to_string(cfg.heads) + " heads");
  }
  Tensor s = memory;
  Tensor t = query;
  if (cfg.mode == AttentionMode::kProjected) {
    if (!params.query || !params.memory) throw std::invalid_argument("projected attention is missing its projections");
    s = ops::matmul(s, *params.memory);
    t = ops::matmul(t, *params.query);
  }
  if (cfg.heads == 1) return attention(s, t, mask);
  auto s_heads = ops::split_channels(s, cfg.heads);
  auto t_heads = ops::split_channels(t, cfg.heads);
  std::vector<Tensor> outs;
  outs.reserve(static_cast<std::size_t>(cfg.heads));
  for (std::size_t h = 0; h < s_heads.size(); ++h) outs.push_back(attention(s_heads[h], t_heads[h], mask));
  return ops::concat_channels(outs);
}

Tensor conv_box(const Tensor& x, const ConvBoxParams& params) {
  auto conv = ops::depthwise_sep_conv(ops::relu(x), params.depthwise, params.pointwise, params.dilation,
                                      params.padding);
  return ops::layer_norm(ops::add(x, conv), params.norm.gain, params.norm.bias);
}

Tensor residual_norm(const Tensor& x, const std::function<Tensor(const Tensor&)>& f, const NormParams& norm) {
  auto fx = f(x);
  if (fx.shape() != x.shape()) {
    throw std::invalid_argument("residual branch changed shape " + shape_string(x.shape()) + " to " +
                                shape_string(fx.shape()));
  }
  return ops::layer_norm(ops::add(x, fx), norm.gain, norm.bias);
}

}  // namespace posenet
