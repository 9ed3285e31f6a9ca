// Copyright 2026 The PoseNet Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "posenet/gradcheck.hpp"
#include "posenet/ops.hpp"
#include "posenet/parameters.hpp"
#include "test_util.hpp"

namespace posenet {
namespace {

using testing::bit_equal;
using testing::max_abs_diff;
using testing::random_tensor;

TEST(Tensor, ShapeAndDataMustAgree) {
  EXPECT_THROW(Tensor({2, 2}, {1, 2, 3}), std::invalid_argument);
  Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.numel(), 6);
  EXPECT_EQ(t.dim(-1), 3);
  EXPECT_DOUBLE_EQ(t.at({1, 2}), 6.0);
}

TEST(Tensor, NonFiniteIsDetectable) {
  Tensor t({2}, {1.0, std::nan("")});
  EXPECT_FALSE(t.all_finite());
  EXPECT_TRUE(Tensor::zeros({3}).all_finite());
}

TEST(Matmul, HandExamples) {
  Tensor a({2, 2}, {1, 2, 3, 4});
  auto c = ops::matmul(a, Tensor({2, 2}, {5, 6, 7, 8}));
  EXPECT_TRUE(bit_equal(c.data(), std::vector<double>{19, 22, 43, 50}));
  auto id = ops::matmul(a, Tensor({2, 2}, {1, 0, 0, 1}));
  EXPECT_TRUE(bit_equal(id.data(), a.data()));
  auto z = ops::matmul(Tensor({1, 2}, {0, 0}), Tensor({2, 1}, {1, 1}));
  EXPECT_EQ(z.shape(), (Shape{1, 1}));
  EXPECT_EQ(z.item(), 0.0);
}

TEST(Matmul, BatchBroadcastAndErrors) {
  Rng rng(1);
  auto a = random_tensor(rng, {3, 2, 4});
  auto b = random_tensor(rng, {4, 5});
  auto c = ops::matmul(a, b);
  EXPECT_EQ(c.shape(), (Shape{3, 2, 5}));
  // Batch 1 equals the plain 2-d product.
  auto a1 = Tensor({2, 4}, std::vector<double>(a.data().begin() + 8, a.data().begin() + 16));
  auto c1 = ops::matmul(a1, b);
  for (int i = 0; i < 10; ++i) EXPECT_NEAR(c.data()[10 + i], c1.data()[i], 1e-14);
  try {
    ops::matmul(a, random_tensor(rng, {3, 5}));
    FAIL() << "expected a shape error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("[3,2,4]"), std::string::npos) << e.what();
  }
}

TEST(Softmax, HandExamples) {
  auto u = ops::softmax(Tensor({3}, {0, 0, 0}));
  for (double v : u.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  auto m = ops::softmax(Tensor({2}, {5.0, 99.0}), Mask({2}, std::vector<std::uint8_t>{1, 0}));
  EXPECT_EQ(m.data()[0], 1.0);
  EXPECT_EQ(m.data()[1], 0.0);
  auto p = ops::softmax(Tensor({2}, {std::log(2.0), 0.0}));
  EXPECT_NEAR(p.data()[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(p.data()[1], 1.0 / 3.0, 1e-15);
}

TEST(Softmax, RowsSumToOneAndMaskedAreZero) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    auto x = random_tensor(rng, {3, 6, 6}, 50.0);
    auto y = ops::softmax(x, Mask::causal(6));
    for (std::int64_t r = 0; r < 18; ++r) {
      double s = 0.0;
      for (std::int64_t c = 0; c < 6; ++c) {
        const double v = y.data()[static_cast<std::size_t>(r * 6 + c)];
        if (c > r % 6) EXPECT_EQ(v, 0.0);
        s += v;
      }
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
  }
}

TEST(Softmax, FullyMaskedRowThrows) {
  EXPECT_THROW(ops::softmax(Tensor({2}, {1, 2}), Mask({2}, false)), std::invalid_argument);
}

TEST(Conv1d, CausalHandExamples) {
  Tensor taps({2, 1, 1}, {1, 1});
  auto y = ops::conv1d(Tensor({1, 3, 1}, {1, 2, 3}), taps, 1, Padding::kCausal);
  EXPECT_TRUE(bit_equal(y.data(), std::vector<double>{1, 3, 5}));
  auto z = ops::conv1d(Tensor({1, 5, 1}, {1, 0, 0, 0, 0}), taps, 2, Padding::kCausal);
  EXPECT_TRUE(bit_equal(z.data(), std::vector<double>{1, 0, 1, 0, 0}));
}

TEST(Conv1d, WidthOneIdentity) {
  Rng rng(3);
  auto x = random_tensor(rng, {2, 5, 3});
  Tensor eye({1, 3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  for (std::int64_t dil : {1, 2, 4}) {
    for (auto pad : {Padding::kSymmetric, Padding::kCausal}) {
      EXPECT_TRUE(bit_equal(ops::conv1d(x, eye, dil, pad).data(), x.data()));
    }
  }
}

TEST(Conv1d, CausalNeverReadsFuture) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const std::int64_t n = 7;
    auto x = random_tensor(rng, {1, n, 2});
    auto k = random_tensor(rng, {3, 2, 2});
    const std::int64_t dil = 1 + trial % 3;
    auto base = ops::conv1d(x, k, dil, Padding::kCausal);
    const std::int64_t t = trial % n;
    auto x2 = x.clone();
    for (std::int64_t p = t + 1; p < n; ++p) x2.mutable_data()[static_cast<std::size_t>(p * 2)] += 10.0;
    auto moved = ops::conv1d(x2, k, dil, Padding::kCausal);
    for (std::int64_t p = 0; p <= t; ++p) {
      EXPECT_EQ(testing::row_at(base, 0, p), testing::row_at(moved, 0, p));
    }
  }
}

TEST(Conv1d, SymmetricWindow) {
  Rng rng(5);
  const std::int64_t n = 11;
  for (std::int64_t k : {2, 3, 4}) {
    for (std::int64_t dil : {1, 2}) {
      auto kern = random_tensor(rng, {k, 1, 1});
      const std::int64_t left = (k - 1) / 2 * dil;
      const std::int64_t right = (k - 1 - (k - 1) / 2) * dil;
      for (std::int64_t j = 0; j < n; ++j) {
        Tensor x = Tensor::zeros({1, n, 1});
        x.mutable_data()[static_cast<std::size_t>(j)] = 1.0;
        auto y = ops::conv1d(x, kern, dil, Padding::kSymmetric);
        for (std::int64_t t = 0; t < n; ++t) {
          if (j < t - left || j > t + right) EXPECT_EQ(y.data()[static_cast<std::size_t>(t)], 0.0);
        }
      }
    }
  }
}

TEST(DepthwiseSepConv, MatchesDenseFactorization) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const std::int64_t d = 1 + trial % 8;
    const std::int64_t n = 1 + (trial * 5) % 16;
    const std::int64_t k = 1 + trial % 4;
    const std::int64_t dil = 1 + trial % 3;
    const auto pad = trial % 2 ? Padding::kCausal : Padding::kSymmetric;
    auto x = random_tensor(rng, {2, n, d});
    auto dk = random_tensor(rng, {k, d});
    auto pk = random_tensor(rng, {d, 3});
    std::vector<double> dense(static_cast<std::size_t>(k * d * d), 0.0);
    for (std::int64_t t = 0; t < k; ++t) {
      for (std::int64_t c = 0; c < d; ++c) dense[static_cast<std::size_t>((t * d + c) * d + c)] = dk.at({t, c});
    }
    auto oracle = ops::matmul(ops::conv1d(x, Tensor({k, d, d}, dense), dil, pad), pk);
    EXPECT_LT(max_abs_diff(ops::depthwise_sep_conv(x, dk, pk, dil, pad), oracle), 1e-12);
  }
}

TEST(DepthwiseSepConv, IdentityAndZero) {
  Rng rng(7);
  auto x = random_tensor(rng, {1, 6, 3});
  Tensor center({3, 3}, {0, 0, 0, 1, 1, 1, 0, 0, 0});
  Tensor eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  EXPECT_TRUE(bit_equal(ops::depthwise_sep_conv(x, center, eye, 1, Padding::kSymmetric).data(), x.data()));
  auto z = ops::depthwise_sep_conv(x, Tensor::zeros({3, 3}), eye, 2, Padding::kSymmetric);
  for (double v : z.data()) EXPECT_EQ(v, 0.0);
}

TEST(LayerNorm, HandExamples) {
  auto y = ops::layer_norm(Tensor({2}, {1, 3}), Tensor::full({2}, 1), Tensor::zeros({2}));
  EXPECT_NEAR(y.data()[0], -1.0, 1e-5);
  EXPECT_NEAR(y.data()[1], 1.0, 1e-5);
  auto c = ops::layer_norm(Tensor::full({4}, 2.5), Tensor::full({4}, 1), Tensor::zeros({4}));
  for (double v : c.data()) EXPECT_LT(std::abs(v), 1e-2);
  Tensor bias({3}, {0.5, -1, 2});
  auto g = ops::layer_norm(Tensor({3}, {1, 5, -2}), Tensor::zeros({3}), bias);
  EXPECT_TRUE(bit_equal(g.data(), bias.data()));
}

TEST(LayerNorm, MeanZeroVarianceOne) {
  Rng rng(8);
  auto x = random_tensor(rng, {5, 7, 16}, 10.0);
  auto y = ops::layer_norm(x, Tensor::full({16}, 1), Tensor::zeros({16}));
  for (std::int64_t r = 0; r < 35; ++r) {
    double mean = 0.0, var = 0.0;
    for (std::int64_t i = 0; i < 16; ++i) mean += y.data()[static_cast<std::size_t>(r * 16 + i)];
    mean /= 16;
    for (std::int64_t i = 0; i < 16; ++i) var += std::pow(y.data()[static_cast<std::size_t>(r * 16 + i)] - mean, 2);
    EXPECT_LT(std::abs(mean), 1e-9);
    EXPECT_NEAR(var / 16, 1.0, 1e-4);
  }
}

TEST(Elementwise, ReluSplitConcatEmbedding) {
  auto r = ops::relu(Tensor({3}, {-1, 0, 2}));
  EXPECT_TRUE(bit_equal(r.data(), std::vector<double>{0, 0, 2}));

  Rng rng(9);
  auto x = random_tensor(rng, {2, 3, 8});
  for (std::int64_t h : {1, 2, 4, 8}) EXPECT_TRUE(bit_equal(ops::concat_channels(ops::split_channels(x, h)).data(), x.data()));
  EXPECT_THROW(ops::split_channels(x, 3), std::invalid_argument);

  auto e = ops::embedding_lookup(IdMatrix(1, 2, std::vector<std::int64_t>{1, 0}), Tensor({2, 1}, {9, 7}));
  EXPECT_EQ(e.shape(), (Shape{1, 2, 1}));
  EXPECT_TRUE(bit_equal(e.data(), std::vector<double>{7, 9}));
  EXPECT_THROW(ops::embedding_lookup(IdMatrix(1, 1, 2), Tensor({2, 1}, {9, 7})), std::out_of_range);
}

TEST(Backward, SquareGradient) {
  Tensor x({1}, {3.0});
  x.set_requires_grad(true);
  Graph g;
  {
    GraphScope scope(g);
    auto loss = ops::sum(ops::mul(x, x));
    g.backward(loss);
  }
  ASSERT_TRUE(x.has_grad());
  EXPECT_EQ(x.grad()[0], 6.0);
}

TEST(Backward, NonScalarLossThrows) {
  Tensor x({2}, {1, 2});
  x.set_requires_grad(true);
  Graph g;
  GraphScope scope(g);
  auto y = ops::scale(x, 2.0);
  EXPECT_THROW(g.backward(y), std::invalid_argument);
}

TEST(Backward, DetachedInputGetsNoGradient) {
  Tensor a({2, 2}, {1, 2, 3, 4});
  a.set_requires_grad(true);
  Tensor b({2, 2}, {5, 6, 7, 8});
  Graph g;
  {
    GraphScope scope(g);
    g.backward(ops::sum(ops::matmul(a, b)));
  }
  EXPECT_TRUE(a.has_grad());
  EXPECT_FALSE(b.has_grad());
}

TEST(Backward, MatmulMatchesFiniteDifferences) {
  Rng rng(10);
  Parameters p;
  p.add("a", random_tensor(rng, {3, 4}));
  p.add("b", random_tensor(rng, {4, 2}));
  auto report = finite_diff_check([&] { return ops::sum(ops::matmul(p.get("a"), p.get("b"))); }, p,
                                  {.step = 1e-5, .tolerance = 1e-6});
  EXPECT_TRUE(report.passed()) << report.worst << " " << report.max_rel_error;
  EXPECT_EQ(report.checked, 20);
}

TEST(Backward, LinearFunctionIsExact) {
  Rng rng(11);
  Parameters p;
  p.add("x", random_tensor(rng, {5}));
  Tensor w({5}, {1, -2, 0.5, 3, 0.25});
  auto report = finite_diff_check([&] { return ops::sum(ops::mul(p.get("x"), w)); }, p);
  EXPECT_LT(report.max_rel_error, 1e-9);
}

TEST(Backward, Deterministic) {
  Rng rng(12);
  auto run = [&](std::uint64_t seed) {
    Rng local(seed);
    Tensor x = random_tensor(local, {2, 5, 4});
    Tensor k = random_tensor(local, {3, 4, 4});
    x.set_requires_grad(true);
    k.set_requires_grad(true);
    Graph g;
    GraphScope scope(g);
    auto y = ops::layer_norm(ops::conv1d(x, k, 2, Padding::kSymmetric), Tensor::full({4}, 1), Tensor::zeros({4}));
    g.backward(ops::sum(ops::mul(y, y)));
    std::vector<double> grads(x.grad().begin(), x.grad().end());
    grads.insert(grads.end(), k.grad().begin(), k.grad().end());
    return grads;
  };
  EXPECT_EQ(run(99), run(99));
}

TEST(Graph, NoRecordingWithoutActiveGraph) {
  Tensor x({2}, {1, 2});
  x.set_requires_grad(true);
  EXPECT_EQ(active_graph(), nullptr);
  auto y = ops::scale(x, 3.0);
  EXPECT_EQ(y.data()[1], 6.0);
  Graph g;
  {
    GraphScope scope(g);
    ops::scale(x, 3.0);
  }
  EXPECT_EQ(g.count("scale"), 1u);
}

}  // namespace
}  // namespace posenet
