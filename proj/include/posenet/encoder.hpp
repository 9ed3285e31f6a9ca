// Copyright 2026 The PoseNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "posenet/layers.hpp"
#include "posenet/parameters.hpp"

namespace posenet {

struct EncoderConfig {
  std::int64_t num_layers = 6;
  std::int64_t depth = 64;
  std::int64_t kernel = 3;
  std::vector<std::int64_t> dilations = {1, 2};  // one per conv box
  bool use_dilation = true;                      // false: every box uses dilation 1
  bool self_attention = true;
  bool pe_per_layer = true;
  std::int64_t ffn_hidden = 0;  // 0 means 4 * depth
  std::int64_t ffn_layers = 2;
  AttentionConfig attention;

  std::int64_t ffn_hidden_size() const { return ffn_hidden > 0 ? ffn_hidden : 4 * depth; }
  std::vector<std::int64_t> effective_dilations() const;
  void validate() const;
};

struct EncoderLayerParams {
  std::vector<ConvBoxParams> boxes;
  AttentionParams attention;
  NormParams attention_norm;
  FFNParams ffn;
  NormParams ffn_norm;
};

struct EncoderParams {
  std::vector<EncoderLayerParams> layers;
};

// Shared helpers for both stacks.
void append_ffn_inventory(std::vector<ParamSpec>& out, const std::string& prefix, std::int64_t depth,
                          std::int64_t hidden, std::int64_t layers);
void append_norm_inventory(std::vector<ParamSpec>& out, const std::string& prefix, std::int64_t depth);
void append_attention_inventory(std::vector<ParamSpec>& out, const std::string& prefix, std::int64_t depth,
                                const AttentionConfig& cfg);
FFNParams bind_ffn(const Parameters& params, const std::string& prefix, std::int64_t layers);
NormParams bind_norm(const Parameters& params, const std::string& prefix);
AttentionParams bind_attention(const Parameters& params, const std::string& prefix, const AttentionConfig& cfg);

std::vector<ParamSpec> encoder_inventory(const EncoderConfig& cfg, const std::string& prefix = "encoder");
EncoderParams bind_encoder(const EncoderConfig& cfg, const Parameters& params, const std::string& prefix = "encoder");

/// Runs the encoder stack over already-embedded input e [b, n, d]. Each layer:
/// timing signal (when pe_per_layer), two symmetric conv boxes at the
/// configured dilations, optional self-attention and a closing FFN, each
/// wrapped as norm(x + f(x)). Padded positions are zeroed after every step.
Tensor encode(const Tensor& e, const Mask& pad_mask, const EncoderConfig& cfg, const EncoderParams& params,
              const PositionEncoding& pe);

/// Half-width of the input window that can reach one output position after
/// `layer` layers (1-based), counting conv boxes only.
std::int64_t receptive_field(const EncoderConfig& cfg, std::int64_t layer);

/// Key mask [b, 1, n] from a [b, n] padding mask.
Mask key_mask(const Mask& pad_mask);

}  // namespace posenet
