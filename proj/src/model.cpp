// Copyright 2026 The PoseNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "posenet/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "posenet/random.hpp"

namespace posenet {

void ModelConfig::validate() const {
  if (vocab_size < 4) throw std::invalid_argument("vocab_size must be >= 4 (reserved ids)");
  if (depth <= 0 || depth % 2 != 0) throw std::invalid_argument("depth must be positive and even");
  if (max_length < 2) throw std::invalid_argument("max_length must be >= 2");
  if (encoder.depth != depth || decoder.depth != depth) {
    throw std::invalid_argument("encoder/decoder depth must equal the model depth");
  }
  encoder.validate();
  decoder.validate();
}

std::vector<ParamSpec> parameter_inventory(const ModelConfig& cfg) {
  cfg.validate();
  const auto v = cfg.vocab_size;
  const auto d = cfg.depth;
  std::vector<ParamSpec> out;
  out.push_back({"embedding.source", {v, d}, ParamInit::kUniform, 1});
  if (!cfg.tie_embeddings) out.push_back({"embedding.target", {v, d}, ParamInit::kUniform, 1});
  for (auto& spec : encoder_inventory(cfg.encoder)) out.push_back(std::move(spec));
  for (auto& spec : decoder_inventory(cfg.decoder)) out.push_back(std::move(spec));
  out.push_back({"output.weight", {d, v}, ParamInit::kUniform, d});
  out.push_back({"output.bias", {v}, ParamInit::kZeros, 1});
  return out;
}

Parameters init_from_inventory(const std::vector<ParamSpec>& inventory, Rng& rng) {
  Parameters params;
  for (const auto& spec : inventory) {
    std::vector<double> values(static_cast<std::size_t>(numel(spec.shape)));
    switch (spec.init) {
      case ParamInit::kUniform: {
        const double bound = 1.0 / std::sqrt(static_cast<double>(spec.fan_in));
        for (auto& v : values) v = rng.uniform(-bound, bound);
        break;
      }
      case ParamInit::kOnes:
        std::fill(values.begin(), values.end(), 1.0);
        break;
      case ParamInit::kZeros:
        break;
    }
    params.add(spec.name, Tensor(spec.shape, std::move(values)));
  }
  return params;
}

Parameters init_parameters(const ModelConfig& cfg, std::uint64_t seed) {
  Rng rng(derive_seed(seed, /*stream=*/0x1417));
  return init_from_inventory(parameter_inventory(cfg), rng);
}

Model::Model(ModelConfig cfg, Parameters params)
    : cfg_(std::move(cfg)), params_(std::move(params)), pe_(position_encoding(cfg_.max_length, cfg_.depth)) {
  const auto inventory = parameter_inventory(cfg_);
  if (inventory.size() != params_.size()) {
    throw std::invalid_argument("parameter inventory has " + std::to_string(params_.size()) + " tensors, config needs " +
                                std::to_string(inventory.size()));
  }
  for (const auto& spec : inventory) {
    if (!params_.contains(spec.name)) throw std::invalid_argument("missing parameter '" + spec.name + "'");
    if (params_.get(spec.name).shape() != spec.shape) {
      throw std::invalid_argument("parameter '" + spec.name + "' has shape " +
                                  shape_string(params_.get(spec.name).shape()) + ", expected " +
                                  shape_string(spec.shape));
    }
  }
  encoder_ = bind_encoder(cfg_.encoder, params_);
  decoder_ = bind_decoder(cfg_.decoder, params_);
  source_embedding_ = params_.get("embedding.source");
  target_embedding_ = cfg_.tie_embeddings ? source_embedding_ : params_.get("embedding.target");
  output_weight_ = params_.get("output.weight");
  output_bias_ = params_.get("output.bias");
}

Model Model::initialize(const ModelConfig& cfg) { return Model(cfg, init_parameters(cfg, cfg.seed)); }

Mask pad_mask(const IdMatrix& ids) {
  Mask mask({ids.rows(), ids.cols()}, false);
  const auto flat = ids.flat();
  for (std::size_t i = 0; i < flat.size(); ++i) mask.set(static_cast<std::int64_t>(i), flat[i] != token::kPad);
  return mask;
}

IdMatrix shift_right(const IdMatrix& targets) {
  IdMatrix out(targets.rows(), targets.cols(), token::kPad);
  for (std::int64_t r = 0; r < targets.rows(); ++r) {
    if (targets.cols() == 0) break;
    out(r, 0) = token::kBos;
    for (std::int64_t c = 1; c < targets.cols(); ++c) out(r, c) = targets(r, c - 1);
  }
  return out;
}

namespace {

void check_length(const Model& model, const IdMatrix& ids, const char* what) {
  if (ids.cols() > model.config().max_length) {
    throw std::invalid_argument(std::string(what) + " length " + std::to_string(ids.cols()) +
                                " exceeds max_length " + std::to_string(model.config().max_length));
  }
}

// Embedding with padded rows zeroed; the timing signal is added only when
// `with_timing` is set.
Tensor embed(const Model& model, const IdMatrix& ids, const Tensor& table, const Mask& mask, bool with_timing) {
  TraceScope scope("model");
  auto e = ops::embedding_lookup(ids, table);
  if (with_timing) e = add_timing(e, model.timing());
  return ops::mask_positions(e, mask);
}

Tensor project(const Model& model, const Tensor& states) {
  TraceScope scope("model");
  return ops::add(ops::matmul(states, model.output_weight()), model.output_bias());
}

}  // namespace

Tensor encode_source(const Model& model, const IdMatrix& src) {
  check_length(model, src, "source");
  const Mask mask = pad_mask(src);
  auto e = embed(model, src, model.source_embedding(), mask, /*with_timing=*/true);
  return encode(e, mask, model.config().encoder, model.encoder(), model.timing());
}

Tensor forward_train(const Model& model, const IdMatrix& src, const IdMatrix& tgt) {
  if (src.rows() != tgt.rows()) throw std::invalid_argument("source and target batch sizes differ");
  check_length(model, tgt, "target");
  auto h = encode_source(model, src);
  const Mask src_mask = pad_mask(src);
  const Mask tgt_mask = pad_mask(tgt);
  const auto dec_in = shift_right(tgt);
  // The decoder applies its own (single) timing signal.
  auto t_emb = embed(model, dec_in, model.target_embedding(), tgt_mask, /*with_timing=*/false);
  auto states = decode_train(t_emb, h, src_mask, tgt_mask, model.config().decoder, model.decoder(), model.timing());
  return project(model, states);
}

std::int64_t argmax(std::span<const double> values) {
  std::int64_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[static_cast<std::size_t>(best)]) best = static_cast<std::int64_t>(i);
  }
  return best;
}

std::vector<std::vector<std::int64_t>> greedy_generate(const Model& model, const IdMatrix& src, std::int64_t max_len) {
  if (max_len > model.config().max_length) {
    throw std::invalid_argument("max_len " + std::to_string(max_len) + " exceeds max_length");
  }
  const auto b = src.rows();
  const auto v = model.config().vocab_size;
  std::vector<std::vector<std::int64_t>> out(static_cast<std::size_t>(b));
  if (max_len <= 0 || b == 0) return out;

  auto h = encode_source(model, src);
  const Mask src_mask = pad_mask(src);
  std::vector<bool> done(static_cast<std::size_t>(b), false);
  // Decoder input so far: BOS followed by generated tokens. Finished rows keep
  // being fed EOS; their outputs are ignored.
  std::vector<std::int64_t> prefix(static_cast<std::size_t>(b), token::kBos);
  std::int64_t length = 1;
  for (std::int64_t step = 0; step < max_len; ++step) {
    IdMatrix ids(b, length, prefix);
    auto t_emb = embed(model, ids, model.target_embedding(), Mask({b, length}, true), false);
    auto last = decode_step(t_emb, h, src_mask, model.config().decoder, model.decoder(), model.timing());
    auto logits = project(model, last);
    std::vector<std::int64_t> next(static_cast<std::size_t>(b), token::kEos);
    bool all_done = true;
    for (std::int64_t r = 0; r < b; ++r) {
      if (done[static_cast<std::size_t>(r)]) continue;
      const auto tok = argmax(logits.data().subspan(static_cast<std::size_t>(r * v), static_cast<std::size_t>(v)));
      out[static_cast<std::size_t>(r)].push_back(tok);
      next[static_cast<std::size_t>(r)] = tok;
      if (tok == token::kEos) {
        done[static_cast<std::size_t>(r)] = true;
      } else {
        all_done = false;
      }
    }
    if (all_done) break;
    std::vector<std::int64_t> grown;
    grown.reserve(static_cast<std::size_t>(b * (length + 1)));
    for (std::int64_t r = 0; r < b; ++r) {
      for (std::int64_t c = 0; c < length; ++c) grown.push_back(prefix[static_cast<std::size_t>(r * length + c)]);
      grown.push_back(next[static_cast<std::size_t>(r)]);
    }
    prefix = std::move(grown);
    ++length;
  }
  return out;
}

}  // namespace posenet
