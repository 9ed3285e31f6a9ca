// Copyright 2026 The PoseNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "posenet/encoder.hpp"
#include "posenet/layers.hpp"
#include "posenet/parameters.hpp"

namespace posenet {

/// Decoder boxes are always causal with dilation 1; there is no knob for it.
struct DecoderConfig {
  std::int64_t num_layers = 5;
  std::int64_t depth = 64;
  std::int64_t kernel = 3;
  bool self_attention = true;
  bool apply_pe_once = true;  // false: no timing signal at all
  std::int64_t ffn_hidden = 0;
  std::int64_t ffn_layers = 2;
  AttentionConfig attention;

  std::int64_t ffn_hidden_size() const { return ffn_hidden > 0 ? ffn_hidden : 4 * depth; }
  void validate() const;
};

struct DecoderLayerParams {
  AttentionParams self_attention;
  NormParams self_attention_norm;
  AttentionParams cross_attention;
  NormParams cross_attention_norm;
  std::vector<ConvBoxParams> boxes;
  FFNParams ffn;
  NormParams ffn_norm;
};

struct DecoderParams {
  std::vector<DecoderLayerParams> layers;
};

std::vector<ParamSpec> decoder_inventory(const DecoderConfig& cfg, const std::string& prefix = "decoder");
DecoderParams bind_decoder(const DecoderConfig& cfg, const Parameters& params, const std::string& prefix = "decoder");

/// Teacher-forced decoder pass over the shifted target embedding t_emb
/// [b, m, d] against encoder output h [b, n, d]. Output position i depends
/// only on target positions <= i and on all unpadded positions of h.
Tensor decode_train(const Tensor& t_emb, const Tensor& h, const Mask& src_mask, const Mask& tgt_mask,
                    const DecoderConfig& cfg, const DecoderParams& params, const PositionEncoding& pe);

/// Representation [b, 1, d] at the last position of a non-empty prefix.
/// Re-runs the prefix; there is no incremental state.
Tensor decode_step(const Tensor& prefix_emb, const Tensor& h, const Mask& src_mask, const DecoderConfig& cfg,
                   const DecoderParams& params, const PositionEncoding& pe);

/// causal(m) AND key-is-real, shaped [b, m, m].
Mask causal_key_mask(const Mask& tgt_mask);

}  // namespace posenet
