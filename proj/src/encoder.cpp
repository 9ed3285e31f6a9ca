// Copyright 2026 The PoseNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "posenet/encoder.hpp"

#include <stdexcept>

namespace posenet {

void EncoderConfig::validate() const {
  if (num_layers < 1) throw std::invalid_argument("encoder needs at least one layer");
  if (kernel < 1) throw std::invalid_argument("encoder kernel width must be >= 1");
  if (dilations.size() != 2) throw std::invalid_argument("encoder needs one dilation per conv box (2)");
  for (auto d : dilations) {
    if (d < 1) throw std::invalid_argument("encoder dilations must be >= 1");
  }
  if (ffn_layers < 1) throw std::invalid_argument("encoder ffn needs at least one layer");
  if (attention.heads < 1 || depth % attention.heads != 0) {
    throw std::invalid_argument("encoder depth must be divisible by the head count");
  }
}

void append_ffn_inventory(std::vector<ParamSpec>& out, const std::string& prefix, std::int64_t depth,
                          std::int64_t hidden, std::int64_t layers) {
  for (std::int64_t j = 0; j < layers; ++j) {
    const auto in = j == 0 ? depth : hidden;
    const auto width = j + 1 == layers ? depth : hidden;
    const auto tag = prefix + ".ffn." + std::to_string(j);
    out.push_back({tag + ".weight", {in, width}, ParamInit::kUniform, in});
    out.push_back({tag + ".bias", {width}, ParamInit::kZeros, 1});
  }
}

void append_norm_inventory(std::vector<ParamSpec>& out, const std::string& prefix, std::int64_t depth) {
  out.push_back({prefix + ".gain", {depth}, ParamInit::kOnes, 1});
  out.push_back({prefix + ".bias", {depth}, ParamInit::kZeros, 1});
}

void append_attention_inventory(std::vector<ParamSpec>& out, const std::string& prefix, std::int64_t depth,
                                const AttentionConfig& cfg) {
  if (cfg.mode != AttentionMode::kProjected) return;
  out.push_back({prefix + ".query", {depth, depth}, ParamInit::kUniform, depth});
  out.push_back({prefix + ".memory", {depth, depth}, ParamInit::kUniform, depth});
}

FFNParams bind_ffn(const Parameters& params, const std::string& prefix, std::int64_t layers) {
  FFNParams ffn;
  for (std::int64_t j = 0; j < layers; ++j) {
    const auto tag = prefix + ".ffn." + std::to_string(j);
    ffn.weights.push_back(params.get(tag + ".weight"));
    ffn.biases.push_back(params.get(tag + ".bias"));
  }
  return ffn;
}

NormParams bind_norm(const Parameters& params, const std::string& prefix) {
  return {params.get(prefix + ".gain"), params.get(prefix + ".bias")};
}

AttentionParams bind_attention(const Parameters& params, const std::string& prefix, const AttentionConfig& cfg) {
  AttentionParams out;
  if (cfg.mode == AttentionMode::kProjected) {
    out.query = params.get(prefix + ".query");
    out.memory = params.get(prefix + ".memory");
  }
  return out;
}

std::vector<std::int64_t> EncoderConfig::effective_dilations() const {
  if (use_dilation) return dilations;
  return std::vector<std::int64_t>(dilations.size(), 1);
}

std::vector<ParamSpec> encoder_inventory(const EncoderConfig& cfg, const std::string& prefix) {
  cfg.validate();
  std::vector<ParamSpec> out;
  const auto d = cfg.depth;
  for (std::int64_t l = 0; l < cfg.num_layers; ++l) {
    const auto layer = prefix + "." + std::to_string(l);
    for (std::size_t b = 0; b < cfg.dilations.size(); ++b) {
      const auto box = layer + ".box" + std::to_string(b);
      out.push_back({box + ".depthwise", {cfg.kernel, d}, ParamInit::kUniform, cfg.kernel});
      out.push_back({box + ".pointwise", {d, d}, ParamInit::kUniform, d});
      append_norm_inventory(out, box + ".norm", d);
    }
    if (cfg.self_attention) {
      append_attention_inventory(out, layer + ".self_attention", d, cfg.attention);
      append_norm_inventory(out, layer + ".self_attention.norm", d);
    }
    append_ffn_inventory(out, layer, d, cfg.ffn_hidden_size(), cfg.ffn_layers);
    append_norm_inventory(out, layer + ".ffn.norm", d);
  }
  return out;
}

EncoderParams bind_encoder(const EncoderConfig& cfg, const Parameters& params, const std::string& prefix) {
  cfg.validate();
  EncoderParams out;
  const auto dilation = cfg.effective_dilations();
  for (std::int64_t l = 0; l < cfg.num_layers; ++l) {
    const auto layer = prefix + "." + std::to_string(l);
    EncoderLayerParams lp;
    for (std::size_t b = 0; b < cfg.dilations.size(); ++b) {
      const auto box = layer + ".box" + std::to_string(b);
      lp.boxes.push_back({params.get(box + ".depthwise"), params.get(box + ".pointwise"),
                          bind_norm(params, box + ".norm"), dilation[b], Padding::kSymmetric});
    }
    if (cfg.self_attention) {
      lp.attention = bind_attention(params, layer + ".self_attention", cfg.attention);
      lp.attention_norm = bind_norm(params, layer + ".self_attention.norm");
    }
    lp.ffn = bind_ffn(params, layer, cfg.ffn_layers);
    lp.ffn_norm = bind_norm(params, layer + ".ffn.norm");
    out.layers.push_back(std::move(lp));
  }
  return out;
}

Mask key_mask(const Mask& pad_mask) {
  if (pad_mask.shape().size() != 2) throw std::invalid_argument("padding mask must be [b, n]");
  const auto b = pad_mask.dim(0);
  const auto n = pad_mask.dim(1);
  return Mask({b, 1, n}, std::vector<std::uint8_t>(pad_mask.bits().begin(), pad_mask.bits().end()));
}

Tensor encode(const Tensor& e, const Mask& pad_mask, const EncoderConfig& cfg, const EncoderParams& params,
              const PositionEncoding& pe) {
  TraceScope scope("encoder");
  if (e.rank() != 3 || e.dim(2) != cfg.depth) {
    throw std::invalid_argument("encoder input " + shape_string(e.shape()) + " does not have depth " +
                                std::to_string(cfg.depth));
  }
  if (static_cast<std::int64_t>(params.layers.size()) != cfg.num_layers) {
    throw std::invalid_argument("encoder parameters do not match the layer count");
  }
  const Mask keys = key_mask(pad_mask);
  Tensor x = e;
  for (const auto& layer : params.layers) {
    if (cfg.pe_per_layer) x = ops::mask_positions(add_timing(x, pe), pad_mask);
    for (const auto& box : layer.boxes) x = ops::mask_positions(conv_box(x, box), pad_mask);
    if (cfg.self_attention) {
      x = residual_norm(
          x, [&](const Tensor& in) { return multi_head_attention(in, in, &keys, cfg.attention, layer.attention); },
          layer.attention_norm);
      x = ops::mask_positions(x, pad_mask);
    }
    x = residual_norm(x, [&](const Tensor& in) { return ffn_apply(in, layer.ffn); }, layer.ffn_norm);
    x = ops::mask_positions(x, pad_mask);
  }
  return x;
}

std::int64_t receptive_field(const EncoderConfig& cfg, std::int64_t layer) {
  if (layer < 0 || layer > cfg.num_layers) {
    throw std::out_of_range("layer index " + std::to_string(layer) + " outside [0, " +
                            std::to_string(cfg.num_layers) + "]");
  }
  std::int64_t per_layer = 0;
  for (auto dilation : cfg.effective_dilations()) per_layer += (cfg.kernel / 2) * dilation;  // ceil((k-1)/2) == k/2
  return per_layer * layer;
}

}  // namespace posenet
