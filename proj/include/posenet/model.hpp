// Copyright 2026 The PoseNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "posenet/decoder.hpp"
#include "posenet/encoder.hpp"
#include "posenet/layers.hpp"
#include "posenet/parameters.hpp"
#include "posenet/random.hpp"

namespace posenet {

namespace token {
inline constexpr std::int64_t kPad = 0;
inline constexpr std::int64_t kEos = 1;
inline constexpr std::int64_t kBos = 2;
inline constexpr std::int64_t kUnk = 3;
inline constexpr std::int64_t kFirstSymbol = 4;
}  // namespace token

struct ModelConfig {
  std::int64_t vocab_size = 20;
  std::int64_t depth = 64;
  std::int64_t max_length = 32;
  EncoderConfig encoder;
  DecoderConfig decoder;
  bool tie_embeddings = false;
  std::uint64_t seed = 1;

  /// Checks invariants (V >= 4, even depth, max_length >= 2) and that the
  /// sub-configs agree on depth.
  void validate() const;
};

std::vector<ParamSpec> parameter_inventory(const ModelConfig& cfg);

/// Uniform(+-1/sqrt(fan_in)) matrices and embeddings, unit gains, zero biases.
Parameters init_parameters(const ModelConfig& cfg, std::uint64_t seed);

/// Draws every inventory entry in order from `rng`.
Parameters init_from_inventory(const std::vector<ParamSpec>& inventory, Rng& rng);

/// Parameters bound to the architecture. Copies share parameter storage.
class Model {
 public:
  Model(ModelConfig cfg, Parameters params);
  static Model initialize(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  const Parameters& parameters() const { return params_; }
  Parameters& parameters() { return params_; }
  const PositionEncoding& timing() const { return pe_; }
  const EncoderParams& encoder() const { return encoder_; }
  const DecoderParams& decoder() const { return decoder_; }
  const Tensor& source_embedding() const { return source_embedding_; }
  const Tensor& target_embedding() const { return target_embedding_; }
  const Tensor& output_weight() const { return output_weight_; }
  const Tensor& output_bias() const { return output_bias_; }

  Model clone() const { return Model(cfg_, params_.clone()); }

 private:
  ModelConfig cfg_;
  Parameters params_;
  PositionEncoding pe_;
  EncoderParams encoder_;
  DecoderParams decoder_;
  Tensor source_embedding_;
  Tensor target_embedding_;
  Tensor output_weight_;
  Tensor output_bias_;
};

/// Real-token mask (id != PAD).
Mask pad_mask(const IdMatrix& ids);

/// [BOS, y_1, ..., y_{m-1}].
IdMatrix shift_right(const IdMatrix& targets);

/// Embedded and encoded source: h [b, n, d].
Tensor encode_source(const Model& model, const IdMatrix& src);

/// Teacher-forced logits [b, m, V]; logits[:, i] predict tgt[:, i].
Tensor forward_train(const Model& model, const IdMatrix& src, const IdMatrix& tgt);

/// Greedy decoding from BOS. Each row stops at EOS (kept) or max_len tokens.
/// Argmax ties go to the lowest id.
std::vector<std::vector<std::int64_t>> greedy_generate(const Model& model, const IdMatrix& src, std::int64_t max_len);

/// Index of the largest value; ties go to the lowest index.
std::int64_t argmax(std::span<const double> values);

}  // namespace posenet
