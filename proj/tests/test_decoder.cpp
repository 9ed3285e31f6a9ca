// Copyright 2026 The PoseNet Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "posenet/decoder.hpp"
#include "posenet/encoder.hpp"
#include "posenet/gradcheck.hpp"
#include "posenet/model.hpp"
#include "test_util.hpp"

namespace posenet {
namespace {

using testing::random_tensor;
using testing::row_at;

DecoderConfig small_config(std::int64_t layers) {
  DecoderConfig cfg;
  cfg.num_layers = layers;
  cfg.depth = 8;
  cfg.attention.heads = 2;
  return cfg;
}

struct Stack {
  DecoderConfig cfg;
  Parameters params;
  DecoderParams bound;
};

Stack make_stack(const DecoderConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  Stack s{cfg, init_from_inventory(decoder_inventory(cfg), rng), {}};
  s.bound = bind_decoder(cfg, s.params);
  return s;
}

TEST(Decoder, ShapeAndDepthChecks) {
  auto s = make_stack(small_config(2), 1);
  Rng rng(2);
  const auto pe = position_encoding(16, 8);
  auto y = decode_train(random_tensor(rng, {2, 5, 8}), random_tensor(rng, {2, 3, 8}), Mask({2, 3}, true),
                        Mask({2, 5}, true), s.cfg, s.bound, pe);
  EXPECT_EQ(y.shape(), (Shape{2, 5, 8}));
  EXPECT_THROW(decode_train(random_tensor(rng, {2, 5, 8}), random_tensor(rng, {2, 3, 6}), Mask({2, 3}, true),
                            Mask({2, 5}, true), s.cfg, s.bound, pe),
               std::invalid_argument);
}

TEST(Decoder, NoFutureLeakage) {
  Rng rng(3);
  const auto pe = position_encoding(16, 8);
  for (int trial = 0; trial < 10; ++trial) {
    auto cfg = small_config(1 + trial % 2);
    cfg.attention.mode = trial % 3 == 0 ? AttentionMode::kProjected : AttentionMode::kPlain;
    auto s = make_stack(cfg, 100 + static_cast<std::uint64_t>(trial));
    const std::int64_t m = 6;
    auto t = random_tensor(rng, {2, m, 8});
    auto h = random_tensor(rng, {2, 4, 8});
    auto base = decode_train(t, h, Mask({2, 4}, true), Mask({2, m}, true), cfg, s.bound, pe);
    const std::int64_t i = trial % m;
    auto t2 = t.clone();
    for (std::int64_t b = 0; b < 2; ++b) {
      for (std::int64_t p = i + 1; p < m; ++p) {
        for (std::int64_t c = 0; c < 8; ++c) t2.mutable_data()[static_cast<std::size_t>((b * m + p) * 8 + c)] = rng.uniform(-9, 9);
      }
    }
    auto moved = decode_train(t2, h, Mask({2, 4}, true), Mask({2, m}, true), cfg, s.bound, pe);
    for (std::int64_t b = 0; b < 2; ++b) {
      for (std::int64_t p = 0; p <= i; ++p) EXPECT_EQ(row_at(base, b, p), row_at(moved, b, p));
    }
  }
}

TEST(Decoder, StepMatchesFullPass) {
  Rng rng(4);
  auto s = make_stack(small_config(2), 5);
  const auto pe = position_encoding(16, 8);
  auto t = random_tensor(rng, {2, 5, 8});
  auto h = random_tensor(rng, {2, 3, 8});
  Mask src({2, 3}, true);
  src.set(5, false);
  auto full = decode_train(t, h, src, Mask({2, 5}, true), s.cfg, s.bound, pe);
  for (std::int64_t i = 1; i <= 5; ++i) {
    std::vector<double> prefix;
    for (std::int64_t b = 0; b < 2; ++b) {
      for (std::int64_t p = 0; p < i; ++p) {
        auto r = row_at(t, b, p);
        prefix.insert(prefix.end(), r.begin(), r.end());
      }
    }
    auto step = decode_step(Tensor({2, i, 8}, prefix), h, src, s.cfg, s.bound, pe);
    ASSERT_EQ(step.shape(), (Shape{2, 1, 8}));
    for (std::int64_t b = 0; b < 2; ++b) {
      auto a = row_at(full, b, i - 1);
      auto c = row_at(step, b, 0);
      for (int k = 0; k < 8; ++k) EXPECT_NEAR(a[static_cast<std::size_t>(k)], c[static_cast<std::size_t>(k)], 1e-12);
    }
  }
  EXPECT_THROW(decode_step(Tensor::zeros({2, 0, 8}), h, src, s.cfg, s.bound, pe), std::invalid_argument);
}

TEST(Decoder, CrossAttentionReachesEveryRealSourcePosition) {
  Rng rng(6);
  auto s = make_stack(small_config(1), 7);
  const auto pe = position_encoding(16, 8);
  auto t = random_tensor(rng, {1, 3, 8});
  auto h = random_tensor(rng, {1, 4, 8});
  auto base = decode_train(t, h, Mask({1, 4}, true), Mask({1, 3}, true), s.cfg, s.bound, pe);
  for (std::int64_t j = 0; j < 4; ++j) {
    auto h2 = h.clone();
    h2.mutable_data()[static_cast<std::size_t>(j * 8)] += 0.5;
    auto moved = decode_train(t, h2, Mask({1, 4}, true), Mask({1, 3}, true), s.cfg, s.bound, pe);
    EXPECT_FALSE(testing::bit_equal(base.data(), moved.data())) << "source position " << j;
  }
}

TEST(Decoder, TraceIsCausalUndilatedWithAtMostOneTiming) {
  Rng rng(8);
  for (bool pe_once : {true, false}) {
    auto cfg = small_config(3);
    cfg.apply_pe_once = pe_once;
    auto s = make_stack(cfg, 9);
    Graph g;
    {
      GraphScope scope(g);
      decode_train(random_tensor(rng, {1, 4, 8}), random_tensor(rng, {1, 4, 8}), Mask({1, 4}, true),
                   Mask({1, 4}, true), cfg, s.bound, position_encoding(8, 8));
    }
    EXPECT_EQ(g.count("add_timing", "decoder"), pe_once ? 1u : 0u);
    std::size_t convs = 0;
    for (const auto& node : g.nodes()) {
      if (node.tag != "depthwise_conv1d") continue;
      ++convs;
      EXPECT_EQ(node.attrs.dilation, 1);
      EXPECT_EQ(node.attrs.padding, Padding::kCausal);
    }
    EXPECT_EQ(convs, 6u);
  }
}

TEST(Decoder, FullStackGradientCheck) {
  auto cfg = small_config(2);
  cfg.depth = 4;
  cfg.attention.mode = AttentionMode::kProjected;
  auto s = make_stack(cfg, 10);
  Rng rng(11);
  s.params.add("target", random_tensor(rng, {1, 4, 4}));
  s.params.add("memory", random_tensor(rng, {1, 5, 4}));
  auto w = random_tensor(rng, {1, 4, 4});
  Mask src({1, 5}, true);
  src.set(4, false);
  const auto pe = position_encoding(8, 4);
  auto report = finite_diff_check(
      [&] {
        return ops::sum(ops::mul(
            decode_train(s.params.get("target"), s.params.get("memory"), src, Mask({1, 4}, true), cfg, s.bound, pe),
            w));
      },
      s.params);
  EXPECT_TRUE(report.passed()) << report.worst << " " << report.max_rel_error;
}

}  // namespace
}  // namespace posenet
