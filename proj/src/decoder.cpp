// Copyright 2026 The PoseNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "posenet/decoder.hpp"

#include <algorithm>
#include <stdexcept>

namespace posenet {

void DecoderConfig::validate() const {
  if (num_layers < 1) throw std::invalid_argument("decoder needs at least one layer");
  if (kernel < 1) throw std::invalid_argument("decoder kernel width must be >= 1");
  if (ffn_layers < 1) throw std::invalid_argument("decoder ffn needs at least one layer");
  if (attention.heads < 1 || depth % attention.heads != 0) {
    throw std::invalid_argument("decoder depth must be divisible by the head count");
  }
}

std::vector<ParamSpec> decoder_inventory(const DecoderConfig& cfg, const std::string& prefix) {
  cfg.validate();
  std::vector<ParamSpec> out;
  const auto d = cfg.depth;
  for (std::int64_t l = 0; l < cfg.num_layers; ++l) {
    const auto layer = prefix + "." + std::to_string(l);
    if (cfg.self_attention) {
      append_attention_inventory(out, layer + ".self_attention", d, cfg.attention);
      append_norm_inventory(out, layer + ".self_attention.norm", d);
    }
    append_attention_inventory(out, layer + ".cross_attention", d, cfg.attention);
    append_norm_inventory(out, layer + ".cross_attention.norm", d);
    for (int b = 0; b < 2; ++b) {
      const auto box = layer + ".box" + std::to_string(b);
      out.push_back({box + ".depthwise", {cfg.kernel, d}, ParamInit::kUniform, cfg.kernel});
      out.push_back({box + ".pointwise", {d, d}, ParamInit::kUniform, d});
      append_norm_inventory(out, box + ".norm", d);
    }
    append_ffn_inventory(out, layer, d, cfg.ffn_hidden_size(), cfg.ffn_layers);
    append_norm_inventory(out, layer + ".ffn.norm", d);
  }
  return out;
}

DecoderParams bind_decoder(const DecoderConfig& cfg, const Parameters& params, const std::string& prefix) {
  cfg.validate();
  DecoderParams out;
  for (std::int64_t l = 0; l < cfg.num_layers; ++l) {
    const auto layer = prefix + "." + std::to_string(l);
    DecoderLayerParams lp;
    if (cfg.self_attention) {
      lp.self_attention = bind_attention(params, layer + ".self_attention", cfg.attention);
      lp.self_attention_norm = bind_norm(params, layer + ".self_attention.norm");
    }
    lp.cross_attention = bind_attention(params, layer + ".cross_attention", cfg.attention);
    lp.cross_attention_norm = bind_norm(params, layer + ".cross_attention.norm");
    for (int b = 0; b < 2; ++b) {
      const auto box = layer + ".box" + std::to_string(b);
      lp.boxes.push_back({params.get(box + ".depthwise"), params.get(box + ".pointwise"),
                          bind_norm(params, box + ".norm"), 1, Padding::kCausal});
    }
    lp.ffn = bind_ffn(params, layer, cfg.ffn_layers);
    lp.ffn_norm = bind_norm(params, layer + ".ffn.norm");
    out.layers.push_back(std::move(lp));
  }
  return out;
}

Mask causal_key_mask(const Mask& tgt_mask) {
  if (tgt_mask.shape().size() != 2) throw std::invalid_argument("target mask must be [b, m]");
  const auto b = tgt_mask.dim(0);
  const auto m = tgt_mask.dim(1);
  Mask out({b, m, m}, false);
  for (std::int64_t r = 0; r < b; ++r) {
    for (std::int64_t i = 0; i < m; ++i) {
      for (std::int64_t j = 0; j <= i; ++j) out.set((r * m + i) * m + j, tgt_mask[r * m + j]);
    }
  }
  return out;
}

Tensor decode_train(const Tensor& t_emb, const Tensor& h, const Mask& src_mask, const Mask& tgt_mask,
                    const DecoderConfig& cfg, const DecoderParams& params, const PositionEncoding& pe) {
  TraceScope scope("decoder");
  if (t_emb.rank() != 3 || h.rank() != 3 || t_emb.dim(2) != h.dim(2) || t_emb.dim(2) != cfg.depth) {
    throw std::invalid_argument("decoder state " + shape_string(t_emb.shape()) + " and encoder output " +
                                shape_string(h.shape()) + " disagree on depth");
  }
  if (t_emb.dim(0) != h.dim(0)) throw std::invalid_argument("decoder and encoder batch sizes differ");
  if (static_cast<std::int64_t>(params.layers.size()) != cfg.num_layers) {
    throw std::invalid_argument("decoder parameters do not match the layer count");
  }
  const Mask self_keys = causal_key_mask(tgt_mask);
  const Mask cross_keys = key_mask(src_mask);

  Tensor x = t_emb;
  if (cfg.apply_pe_once) x = ops::mask_positions(add_timing(x, pe), tgt_mask);
  for (const auto& layer : params.layers) {
    if (cfg.self_attention) {
      x = residual_norm(
          x,
          [&](const Tensor& in) {
            return multi_head_attention(in, in, &self_keys, cfg.attention, layer.self_attention);
          },
          layer.self_attention_norm);
      x = ops::mask_positions(x, tgt_mask);
    }
    x = residual_norm(
        x, [&](const Tensor& in) { return multi_head_attention(h, in, &cross_keys, cfg.attention, layer.cross_attention); },
        layer.cross_attention_norm);
    x = ops::mask_positions(x, tgt_mask);
    for (const auto& box : layer.boxes) x = ops::mask_positions(conv_box(x, box), tgt_mask);
    x = residual_norm(x, [&](const Tensor& in) { return ffn_apply(in, layer.ffn); }, layer.ffn_norm);
    x = ops::mask_positions(x, tgt_mask);
  }
  return x;
}

Tensor decode_step(const Tensor& prefix_emb, const Tensor& h, const Mask& src_mask, const DecoderConfig& cfg,
                   const DecoderParams& params, const PositionEncoding& pe) {
  if (prefix_emb.rank() != 3 || prefix_emb.dim(1) < 1) {
    throw std::invalid_argument("decode_step needs a non-empty prefix, got " + shape_string(prefix_emb.shape()));
  }
  const auto b = prefix_emb.dim(0);
  const auto i = prefix_emb.dim(1);
  const auto d = prefix_emb.dim(2);
  auto full = decode_train(prefix_emb, h, src_mask, Mask({b, i}, true), cfg, params, pe);
  const auto data = full.data();
  std::vector<double> last(static_cast<std::size_t>(b * d));
  for (std::int64_t r = 0; r < b; ++r) {
    std::copy_n(data.data() + (r * i + i - 1) * d, d, last.data() + r * d);
  }
  return Tensor({b, 1, d}, std::move(last));
}

}  // namespace posenet
