// Copyright 2026 The PoseNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "posenet/grad_suite.hpp"

#include <functional>
#include <map>
#include <memory>

#include "posenet/decoder.hpp"
#include "posenet/encoder.hpp"
#include "posenet/layers.hpp"
#include "posenet/model.hpp"
#include "posenet/random.hpp"
#include "posenet/training.hpp"

namespace posenet {
namespace {

constexpr std::int64_t kB = 2;
constexpr std::int64_t kN = 4;
constexpr std::int64_t kD = 4;

Tensor random_tensor(Rng& rng, Shape shape, double bound = 1.0) {
  std::vector<double> v(static_cast<std::size_t>(numel(shape)));
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return Tensor(std::move(shape), std::move(v));
}

// Weighted sum against a fixed random tensor, so no gradient is trivially
// symmetric (a plain sum of a layer-norm output has zero gradient).
class Probe {
 public:
  explicit Probe(std::uint64_t seed) : rng_(seed) {}

  Tensor operator()(const Tensor& y) {
    auto it = weights_.find(shape_string(y.shape()));
    if (it == weights_.end()) it = weights_.emplace(shape_string(y.shape()), random_tensor(rng_, y.shape())).first;
    return ops::sum(ops::mul(y, it->second));
  }

 private:
  Rng rng_;
  std::map<std::string, Tensor> weights_;
};

Mask ragged_mask() {
  // Row 0 full, row 1 has one trailing pad.
  Mask m({kB, kN}, true);
  m.set(kB * kN - 1, false);
  return m;
}

}  // namespace

std::vector<GradSuiteCase> run_grad_suite(std::uint64_t seed, const GradCheckOptions& options) {
  std::vector<GradSuiteCase> out;
  Rng rng(derive_seed(seed, 0x67726164));
  auto probe = std::make_shared<Probe>(derive_seed(seed, 0x70726f62));
  auto check = [&](const std::string& name, Parameters& params, const std::function<Tensor()>& loss) {
    out.push_back({name, finite_diff_check(loss, params, options)});
  };
  const Mask pads = ragged_mask();

  {
    Parameters p;
    p.add("a", random_tensor(rng, {kB, 3, kD}));
    p.add("b", random_tensor(rng, {kD, 5}));
    check("matmul", p, [&] { return (*probe)(ops::matmul(p.get("a"), p.get("b"))); });
  }
  {
    Parameters p;
    p.add("x", random_tensor(rng, {kB, kN, kN}, 2.0));
    const Mask causal = Mask::causal(kN);
    check("softmax", p, [&] { return (*probe)(ops::softmax(p.get("x"), causal)); });
  }
  {
    Parameters p;
    p.add("x", random_tensor(rng, {kB, kN, kD}));
    p.add("k", random_tensor(rng, {3, kD, kD}));
    check("conv1d_symmetric_dilated", p,
          [&] { return (*probe)(ops::conv1d(p.get("x"), p.get("k"), 2, Padding::kSymmetric)); });
    check("conv1d_causal", p, [&] { return (*probe)(ops::conv1d(p.get("x"), p.get("k"), 1, Padding::kCausal)); });
  }
  {
    Parameters p;
    p.add("x", random_tensor(rng, {kB, kN, kD}));
    p.add("dk", random_tensor(rng, {3, kD}));
    p.add("pk", random_tensor(rng, {kD, kD}));
    check("depthwise_sep_conv", p, [&] {
      return (*probe)(ops::depthwise_sep_conv(p.get("x"), p.get("dk"), p.get("pk"), 2, Padding::kSymmetric));
    });
  }
  {
    Parameters p;
    p.add("x", random_tensor(rng, {kB, kN, kD}));
    p.add("gain", random_tensor(rng, {kD}));
    p.add("bias", random_tensor(rng, {kD}));
    check("layer_norm", p, [&] { return (*probe)(ops::layer_norm(p.get("x"), p.get("gain"), p.get("bias"))); });
  }
  {
    Parameters p;
    p.add("x", random_tensor(rng, {kB, kN, kD}));
    const auto pe = position_encoding(kN, kD);
    check("add_timing", p, [&] { return (*probe)(add_timing(p.get("x"), pe)); });
    check("mask_positions", p, [&] { return (*probe)(ops::mask_positions(p.get("x"), pads)); });
  }
  {
    Parameters p;
    p.add("table", random_tensor(rng, {6, kD}));
    const IdMatrix ids(kB, kN, std::vector<std::int64_t>{4, 5, 5, 1, 2, 3, 0, 0});
    check("embedding", p, [&] { return (*probe)(ops::embedding_lookup(ids, p.get("table"))); });
  }
  {
    Parameters p;
    p.add("x", random_tensor(rng, {kB, kN, kD}));
    p.add("w0", random_tensor(rng, {kD, 2 * kD}));
    p.add("b0", random_tensor(rng, {2 * kD}));
    p.add("w1", random_tensor(rng, {2 * kD, kD}));
    p.add("b1", random_tensor(rng, {kD}));
    check("ffn", p, [&] {
      FFNParams ffn{{p.get("w0"), p.get("w1")}, {p.get("b0"), p.get("b1")}};
      return (*probe)(ffn_apply(p.get("x"), ffn));
    });
  }
  {
    Parameters p;
    p.add("s", random_tensor(rng, {kB, kN, kD}));
    p.add("t", random_tensor(rng, {kB, 3, kD}));
    p.add("wq", random_tensor(rng, {kD, kD}));
    p.add("wm", random_tensor(rng, {kD, kD}));
    const Mask keys = key_mask(pads);
    check("attention", p, [&] { return (*probe)(attention(p.get("s"), p.get("t"), &keys)); });
    check("multi_head_projected_attention", p, [&] {
      AttentionConfig cfg{2, AttentionMode::kProjected};
      AttentionParams ap{p.get("wq"), p.get("wm")};
      return (*probe)(multi_head_attention(p.get("s"), p.get("t"), &keys, cfg, ap));
    });
  }
  {
    Parameters p;
    p.add("x", random_tensor(rng, {kB, kN, kD}));
    p.add("dk", random_tensor(rng, {3, kD}));
    p.add("pk", random_tensor(rng, {kD, kD}));
    p.add("gain", random_tensor(rng, {kD}));
    p.add("bias", random_tensor(rng, {kD}));
    auto box = [&](std::int64_t dilation, Padding padding) {
      return ConvBoxParams{p.get("dk"), p.get("pk"), {p.get("gain"), p.get("bias")}, dilation, padding};
    };
    check("conv_box_encoder", p, [&] { return (*probe)(conv_box(p.get("x"), box(2, Padding::kSymmetric))); });
    check("conv_box_decoder", p, [&] { return (*probe)(conv_box(p.get("x"), box(1, Padding::kCausal))); });
  }
  {
    Parameters p;
    p.add("logits", random_tensor(rng, {kB, kN, 6}, 2.0));
    const IdMatrix targets(kB, kN, std::vector<std::int64_t>{4, 5, 1, 0, 5, 4, 4, 1});
    const Mask tmask = pad_mask(targets);
    check("cross_entropy_smoothed", p,
          [&] { return cross_entropy_loss(p.get("logits"), targets, tmask, 0.1); });
  }

  EncoderConfig ecfg;
  ecfg.num_layers = 1;
  ecfg.depth = kD;
  ecfg.attention = {2, AttentionMode::kProjected};
  DecoderConfig dcfg;
  dcfg.num_layers = 1;
  dcfg.depth = kD;
  dcfg.attention = {2, AttentionMode::kProjected};
  const auto pe = position_encoding(8, kD);
  {
    Parameters p = init_from_inventory(encoder_inventory(ecfg), rng);
    p.add("input", random_tensor(rng, {kB, kN, kD}));
    const auto bound = bind_encoder(ecfg, p);
    check("encoder_layer", p, [&] { return (*probe)(encode(p.get("input"), pads, ecfg, bound, pe)); });
  }
  {
    Parameters p = init_from_inventory(decoder_inventory(dcfg), rng);
    p.add("target", random_tensor(rng, {kB, kN, kD}));
    p.add("memory", random_tensor(rng, {kB, kN, kD}));
    const auto bound = bind_decoder(dcfg, p);
    Mask tmask({kB, kN}, true);
    tmask.set(kB * kN - 1, false);
    tmask.set(kB * kN - 2, false);
    check("decoder_layer", p, [&] {
      return (*probe)(decode_train(p.get("target"), p.get("memory"), pads, tmask, dcfg, bound, pe));
    });
  }
  {
    ModelConfig mcfg;
    mcfg.vocab_size = 8;
    mcfg.depth = kD;
    mcfg.max_length = 8;
    mcfg.encoder = ecfg;
    mcfg.decoder = dcfg;
    mcfg.seed = seed;
    auto model = Model::initialize(mcfg);
    const IdMatrix src(kB, kN, std::vector<std::int64_t>{4, 5, 6, 1, 7, 4, 1, 0});
    const IdMatrix tgt(kB, kN, std::vector<std::int64_t>{6, 5, 4, 1, 4, 7, 1, 0});
    const Mask tmask = pad_mask(tgt);
    check("model_end_to_end", model.parameters(),
          [&] { return cross_entropy_loss(forward_train(model, src, tgt), tgt, tmask, 0.1); });
  }
  return out;
}

}  // namespace posenet
