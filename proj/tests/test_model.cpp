// Copyright 2026 The PoseNet Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "posenet/model.hpp"
#include "test_util.hpp"

namespace posenet {
namespace {

ModelConfig tiny_config(std::uint64_t seed = 3) {
  ModelConfig cfg;
  cfg.vocab_size = 12;
  cfg.depth = 8;
  cfg.max_length = 12;
  cfg.encoder.num_layers = 2;
  cfg.encoder.depth = 8;
  cfg.encoder.attention.heads = 2;
  cfg.decoder.num_layers = 2;
  cfg.decoder.depth = 8;
  cfg.decoder.attention.heads = 2;
  cfg.seed = seed;
  return cfg;
}

IdMatrix random_ids(Rng& rng, std::int64_t rows, std::int64_t cols, std::int64_t vocab) {
  IdMatrix ids(rows, cols);
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::int64_t c = 0; c < cols; ++c) ids(r, c) = rng.between(token::kFirstSymbol, vocab - 1);
  }
  return ids;
}

TEST(Model, InventoryNamesAndShapes) {
  auto cfg = tiny_config();
  auto inv = parameter_inventory(cfg);
  std::set<std::string> names;
  for (const auto& spec : inv) EXPECT_TRUE(names.insert(spec.name).second) << spec.name;
  EXPECT_TRUE(names.contains("embedding.source"));
  EXPECT_TRUE(names.contains("embedding.target"));
  EXPECT_TRUE(names.contains("output.weight"));
  cfg.tie_embeddings = true;
  EXPECT_EQ(parameter_inventory(cfg).size(), inv.size() - 1);
  auto model = Model::initialize(tiny_config());
  EXPECT_EQ(model.parameters().size(), inv.size());
  EXPECT_GT(model.parameters().element_count(), 0);
}

TEST(Model, InitIsSeededWithUnitGainsAndZeroBiases) {
  auto a = init_parameters(tiny_config(), 5);
  auto b = init_parameters(tiny_config(), 5);
  auto c = init_parameters(tiny_config(), 6);
  bool any_diff = false;
  for (const auto& [name, t] : a) {
    EXPECT_TRUE(testing::bit_equal(t.data(), b.get(name).data())) << name;
    any_diff = any_diff || !testing::bit_equal(t.data(), c.get(name).data());
    const bool gain = name.ends_with(".gain");
    const bool bias = name.ends_with(".bias");
    for (double v : t.data()) {
      if (gain) EXPECT_EQ(v, 1.0) << name;
      if (bias) EXPECT_EQ(v, 0.0) << name;
    }
  }
  EXPECT_TRUE(any_diff);
}

TEST(Model, UniformInitMoments) {
  ModelConfig cfg;
  auto params = init_parameters(cfg, 1);
  const auto& w = params.get("encoder.0.box0.pointwise");
  ASSERT_EQ(w.shape(), (Shape{64, 64}));
  double mean = 0.0, sq = 0.0;
  for (double v : w.data()) mean += v;
  mean /= static_cast<double>(w.numel());
  for (double v : w.data()) sq += (v - mean) * (v - mean);
  const double sd = std::sqrt(sq / static_cast<double>(w.numel()));
  const double expected = (1.0 / 8.0) / std::sqrt(3.0);
  EXPECT_NEAR(sd, expected, 0.2 * expected);
}

TEST(Model, ShiftRightAndPadMask) {
  IdMatrix tgt(2, 3, std::vector<std::int64_t>{5, 6, 1, 7, 1, 0});
  auto shifted = shift_right(tgt);
  EXPECT_EQ(shifted, IdMatrix(2, 3, std::vector<std::int64_t>{2, 5, 6, 2, 7, 1}));
  auto mask = pad_mask(tgt);
  EXPECT_EQ(mask.count(), 5);
  EXPECT_FALSE(mask[5]);
}

TEST(Model, ForwardShapeAndErrors) {
  auto model = Model::initialize(tiny_config());
  Rng rng(1);
  auto logits = forward_train(model, random_ids(rng, 3, 5, 12), random_ids(rng, 3, 4, 12));
  EXPECT_EQ(logits.shape(), (Shape{3, 4, 12}));
  EXPECT_THROW(forward_train(model, IdMatrix(1, 3, 12), random_ids(rng, 1, 3, 12)), std::out_of_range);
  EXPECT_THROW(forward_train(model, random_ids(rng, 1, 13, 12), random_ids(rng, 1, 3, 12)), std::invalid_argument);
}

TEST(Model, ForwardIsBitReproducible) {
  Rng rng(2);
  auto src = random_ids(rng, 2, 6, 12);
  auto tgt = random_ids(rng, 2, 5, 12);
  auto a = forward_train(Model::initialize(tiny_config()), src, tgt);
  auto b = forward_train(Model::initialize(tiny_config()), src, tgt);
  EXPECT_TRUE(testing::bit_equal(a.data(), b.data()));
}

TEST(Model, CausalEndToEnd) {
  auto model = Model::initialize(tiny_config());
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    auto src = random_ids(rng, 2, 6, 12);
    auto tgt = random_ids(rng, 2, 6, 12);
    auto base = forward_train(model, src, tgt);
    const std::int64_t i = trial % 6;
    auto tgt2 = tgt;
    // The decoder input at position p is tgt[p - 1], so changing tgt[p] for
    // p > i only affects decoder inputs beyond i.
    for (std::int64_t p = i + 1; p < 6; ++p) tgt2(0, p) = rng.between(4, 11);
    auto moved = forward_train(model, src, tgt2);
    for (std::int64_t p = 0; p <= i; ++p) EXPECT_EQ(testing::row_at(base, 0, p), testing::row_at(moved, 0, p));
  }
}

TEST(Model, SourcePaddingInvariance) {
  auto model = Model::initialize(tiny_config());
  Rng rng(4);
  auto src = random_ids(rng, 1, 5, 12);
  auto tgt = random_ids(rng, 1, 4, 12);
  auto base = forward_train(model, src, tgt);
  std::vector<std::int64_t> longer(src.flat().begin(), src.flat().end());
  longer.insert(longer.end(), {0, 0, 0});
  auto padded = forward_train(model, IdMatrix(1, 8, longer), tgt);
  EXPECT_LT(testing::max_abs_diff(base, padded), 1e-9);
}

TEST(Model, GreedyStopsOnForcedEos) {
  auto model = Model::initialize(tiny_config());
  auto& params = model.parameters();
  auto w = params.get("output.weight").mutable_data();
  std::fill(w.begin(), w.end(), 0.0);
  params.get("output.bias").mutable_data()[token::kEos] = 10.0;
  Rng rng(5);
  auto out = greedy_generate(model, random_ids(rng, 3, 4, 12), 10);
  for (const auto& row : out) EXPECT_EQ(row, (std::vector<std::int64_t>{token::kEos}));
}

TEST(Model, GreedyIsDeterministicAndTeacherForcingConsistent) {
  auto model = Model::initialize(tiny_config(11));
  Rng rng(6);
  auto src = random_ids(rng, 2, 5, 12);
  auto a = greedy_generate(model, src, 8);
  EXPECT_EQ(a, greedy_generate(model, src, 8));
  for (std::int64_t r = 0; r < 2; ++r) {
    const auto& gen = a[static_cast<std::size_t>(r)];
    ASSERT_FALSE(gen.empty());
    auto logits = forward_train(model, IdMatrix(1, 5, std::vector<std::int64_t>(src.row(r).begin(), src.row(r).end())),
                                IdMatrix(1, static_cast<std::int64_t>(gen.size()), gen));
    for (std::size_t p = 0; p < gen.size(); ++p) {
      auto row = logits.data().subspan(p * 12, 12);
      EXPECT_EQ(argmax(row), gen[p]) << "position " << p;
    }
  }
}

TEST(Model, ArgmaxTiesGoLow) {
  std::vector<double> v{0.5, 2.0, 2.0, 1.0};
  EXPECT_EQ(argmax(v), 1);
}

TEST(Model, TraceAsymmetry) {
  auto cfg = tiny_config();
  cfg.encoder.num_layers = 3;
  cfg.decoder.num_layers = 2;
  auto model = Model::initialize(cfg);
  Rng rng(7);
  Graph g;
  {
    GraphScope scope(g);
    forward_train(model, random_ids(rng, 2, 5, 12), random_ids(rng, 2, 4, 12));
  }
  EXPECT_EQ(g.count("add_timing", "encoder"), 3u);
  EXPECT_LE(g.count("add_timing", "decoder"), 1u);
  for (const auto& node : g.nodes()) {
    if (node.tag != "depthwise_conv1d") continue;
    if (node.scope == "decoder") {
      EXPECT_EQ(node.attrs.dilation, 1);
      EXPECT_EQ(node.attrs.padding, Padding::kCausal);
    } else {
      EXPECT_EQ(node.scope, "encoder");
      EXPECT_EQ(node.attrs.padding, Padding::kSymmetric);
    }
  }
}

}  // namespace
}  // namespace posenet
