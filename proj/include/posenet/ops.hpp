// Copyright 2026 The PoseNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "posenet/tensor.hpp"

// Differentiable tensor operations. Every function records a node on the
// active graph (if any) so backward() can differentiate through it.
namespace posenet::ops {

/// Batched matrix product [.., m, p] x [.., p, q] -> [.., m, q]. Leading batch
/// extents must match or be 1 (broadcast); a rank-2 right operand is shared by
/// every batch.
Tensor matmul(const Tensor& a, const Tensor& b);

/// Softmax over the last axis, max-subtracted per row. `mask` is
/// right-aligned against the logits and may broadcast along any axis but the
/// last; masked entries get probability exactly 0. A fully masked row throws.
Tensor softmax(const Tensor& logits);
Tensor softmax(const Tensor& logits, const Mask& mask);

/// Dense 1-D convolution over the sequence axis.
/// x: [b, n, d_in], kernel: [k, d_in, d_out] -> [b, n, d_out].
/// Symmetric padding puts floor((k-1)/2)*dilation zeros on the left and the
/// rest on the right; causal padding puts all (k-1)*dilation on the left.
Tensor conv1d(const Tensor& x, const Tensor& kernel, std::int64_t dilation, Padding padding);

/// Per-channel 1-D convolution. x: [b, n, d], kernel: [k, d] -> [b, n, d].
Tensor depthwise_conv1d(const Tensor& x, const Tensor& kernel, std::int64_t dilation, Padding padding);

/// depthwise_conv1d followed by a position-wise [d, d_out] channel mix.
Tensor depthwise_sep_conv(const Tensor& x, const Tensor& depth_kernel, const Tensor& point_kernel,
                          std::int64_t dilation, Padding padding);

inline constexpr double kLayerNormEps = 1e-6;

/// (x - mean) / sqrt(var + eps) * gain + bias over the last axis, with the
/// population variance.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = kLayerNormEps);

Tensor relu(const Tensor& x);

/// a + b where b's shape equals a's shape or a trailing suffix of it.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
/// Elementwise product of equal shapes.
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

Tensor transpose_last_two(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

/// Splits the last axis into `parts` equal contiguous segments.
std::vector<Tensor> split_channels(const Tensor& x, std::int64_t parts);
Tensor concat_channels(const std::vector<Tensor>& parts);

/// Gathers rows of table [V, d] -> [rows, cols, d].
Tensor embedding_lookup(const IdMatrix& ids, const Tensor& table);

/// Zeroes positions of x [b, n, d] where mask [b, n] is false.
Tensor mask_positions(const Tensor& x, const Mask& mask);

}  // namespace posenet::ops
