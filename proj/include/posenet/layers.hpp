// Copyright 2026 The PoseNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "posenet/ops.hpp"
#include "posenet/tensor.hpp"

namespace posenet {

/// Sinusoidal timing signal: row pos holds sin/cos pairs at frequencies
/// 1 / 10000^(2i/d).
struct PositionEncoding {
  std::int64_t max_length = 0;
  std::int64_t depth = 0;
  Tensor table;  // [max_length, depth]
};

/// Requires an even depth.
PositionEncoding position_encoding(std::int64_t max_length, std::int64_t depth);

/// x [b, n, d] plus the first n rows of the table.
Tensor add_timing(const Tensor& x, const PositionEncoding& pe);

/// n-layer position-wise feed-forward net; relu between layers.
struct FFNParams {
  std::vector<Tensor> weights;  // [d_in_j, d_out_j]
  std::vector<Tensor> biases;   // [d_out_j]
};

Tensor ffn_apply(const Tensor& x, const FFNParams& params);

struct NormParams {
  Tensor gain;
  Tensor bias;
};

enum class AttentionMode { kPlain, kProjected };

struct AttentionConfig {
  std::int64_t heads = 4;
  AttentionMode mode = AttentionMode::kPlain;
};

/// Learned [d, d] maps for projected attention; unused in plain mode.
struct AttentionParams {
  std::optional<Tensor> query;   // applied to T
  std::optional<Tensor> memory;  // applied to S (keys and values)
};

/// softmax(T S^T / sqrt(d)) S with masked logits excluded.
/// S: [b, n, d], T: [b, m, d]; mask broadcasts against [b, m, n].
Tensor attention(const Tensor& memory, const Tensor& query, const Mask* mask = nullptr);

/// Splits channels into cfg.heads segments, attends per segment (scaled by
/// the per-head depth) and concatenates.
Tensor multi_head_attention(const Tensor& memory, const Tensor& query, const Mask* mask, const AttentionConfig& cfg,
                            const AttentionParams& params = {});

struct ConvBoxParams {
  Tensor depthwise;  // [k, d]
  Tensor pointwise;  // [d, d]
  NormParams norm;
  std::int64_t dilation = 1;
  Padding padding = Padding::kSymmetric;
};

/// norm(x + sepconv(relu(x))).
Tensor conv_box(const Tensor& x, const ConvBoxParams& params);

/// norm(x + f(x)); f must preserve the shape.
Tensor residual_norm(const Tensor& x, const std::function<Tensor(const Tensor&)>& f, const NormParams& norm);

}  // namespace posenet
