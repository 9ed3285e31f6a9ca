// Copyright 2026 The PoseNet Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "posenet/config.hpp"
#include "posenet/gradcheck.hpp"
#include "posenet/training.hpp"
#include "test_util.hpp"

namespace posenet {
namespace {

namespace fs = std::filesystem;

ModelConfig tiny_model() {
  ModelConfig cfg;
  cfg.vocab_size = 10;
  cfg.depth = 8;
  cfg.max_length = 10;
  for (auto* a : {&cfg.encoder.attention, &cfg.decoder.attention}) a->heads = 2;
  cfg.encoder.num_layers = 1;
  cfg.encoder.depth = 8;
  cfg.decoder.num_layers = 1;
  cfg.decoder.depth = 8;
  return cfg;
}

TaskSpec tiny_task(TaskKind kind = TaskKind::kCopy) {
  TaskSpec t;
  t.kind = kind;
  t.symbols = 6;
  t.min_length = 2;
  t.max_length = 6;
  return t;
}

TrainConfig tiny_train() {
  TrainConfig t;
  t.batch_size = 8;
  t.train_steps = 20;
  t.eval_every = 10;
  t.eval_examples = 16;
  t.warmup_steps = 10;
  return t;
}

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("posenet_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TEST(CrossEntropy, ClosedForms) {
  IdMatrix targets(1, 2, std::vector<std::int64_t>{1, 3});
  Mask all({1, 2}, true);
  auto uniform = Tensor::zeros({1, 2, 4});
  EXPECT_NEAR(cross_entropy_loss(uniform, targets, all).item(), 1.386294, 1e-6);
  EXPECT_NEAR(neg_log_perplexity(uniform, targets, all), -1.386294, 1e-6);

  Tensor sharp({1, 2, 4}, {0, 800, 0, 0, 0, 0, 0, 800});
  EXPECT_EQ(cross_entropy_loss(sharp, targets, all).item(), 0.0);
  EXPECT_EQ(neg_log_perplexity(sharp, targets, all), 0.0);
}

TEST(CrossEntropy, PaddedPositionsExcluded) {
  IdMatrix targets(1, 3, std::vector<std::int64_t>{1, 3, 0});
  Mask mask({1, 3}, std::vector<std::uint8_t>{1, 1, 0});
  Rng rng(1);
  auto logits = testing::random_tensor(rng, {1, 3, 4});
  auto other = logits.clone();
  for (std::size_t i = 8; i < 12; ++i) other.mutable_data()[i] = 1e3 * static_cast<double>(i);
  EXPECT_EQ(cross_entropy_loss(logits, targets, mask).item(), cross_entropy_loss(other, targets, mask).item());
  EXPECT_THROW(cross_entropy_loss(logits, targets, Mask({1, 3}, false)), std::invalid_argument);
  EXPECT_DOUBLE_EQ(neg_log_perplexity(logits, targets, mask), -cross_entropy_loss(logits, targets, mask).item());
}

TEST(CrossEntropy, SmoothedGradientCheck) {
  Rng rng(2);
  Parameters p;
  p.add("logits", testing::random_tensor(rng, {2, 3, 5}, 3.0));
  IdMatrix targets(2, 3, std::vector<std::int64_t>{1, 4, 0, 2, 2, 3});
  auto mask = Mask({2, 3}, std::vector<std::uint8_t>{1, 1, 0, 1, 1, 1});
  for (double s : {0.0, 0.1}) {
    auto report = finite_diff_check([&] { return cross_entropy_loss(p.get("logits"), targets, mask, s); }, p);
    EXPECT_TRUE(report.passed()) << report.worst;
  }
}

TEST(CrossEntropy, BatchOrderInvariant) {
  Rng rng(3);
  auto logits = testing::random_tensor(rng, {3, 2, 5});
  IdMatrix targets(3, 2, std::vector<std::int64_t>{1, 2, 3, 4, 0, 1});
  Mask mask({3, 2}, true);
  const int perm[] = {2, 0, 1};
  std::vector<double> lp;
  std::vector<std::int64_t> tp;
  for (int r : perm) {
    auto s = logits.data().subspan(static_cast<std::size_t>(r * 10), 10);
    lp.insert(lp.end(), s.begin(), s.end());
    tp.push_back(targets(r, 0));
    tp.push_back(targets(r, 1));
  }
  EXPECT_NEAR(cross_entropy_loss(logits, targets, mask).item(),
              cross_entropy_loss(Tensor({3, 2, 5}, lp), IdMatrix(3, 2, tp), mask).item(), 1e-12);
}

TEST(Schedule, WorkedValues) {
  EXPECT_NEAR(lr_at(400, 64, 400, 1.0), 0.00625, 1e-15);
  EXPECT_DOUBLE_EQ(std::pow(400.0, -0.5), 400.0 * std::pow(400.0, -1.5));
  for (std::int64_t s = 401; s < 2000; s += 37) EXPECT_LT(lr_at(s + 1, 64, 400, 1.0), lr_at(s, 64, 400, 1.0));
  for (std::int64_t s = 1; s < 400; s += 13) EXPECT_LT(lr_at(s, 64, 400, 1.0), lr_at(s + 1, 64, 400, 1.0));
  EXPECT_THROW(lr_at(0, 64, 400, 1.0), std::invalid_argument);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Parameters p;
  p.add("w", Tensor({3}, {1, 2, 3}));
  auto m = make_adam_state(p);
  p.get("w").impl()->grad.assign(3, 0.0);
  adam_step(p, m, 1, 0.1, TrainConfig{});
  EXPECT_TRUE(testing::bit_equal(p.get("w").data(), std::vector<double>{1, 2, 3}));
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Parameters p;
  p.add("w", Tensor({1}, {0.5}));
  auto m = make_adam_state(p);
  p.get("w").impl()->grad.assign(1, 1.0);
  adam_step(p, m, 1, 0.01, TrainConfig{});
  EXPECT_NEAR(0.5 - p.get("w").data()[0], 0.01, 1e-8);
}

TEST(Adam, InventoryMismatchThrows) {
  Parameters p;
  p.add("w", Tensor({1}, {0.5}));
  Parameters q;
  q.add("v", Tensor({1}, {0.5}));
  auto m = make_adam_state(q);
  EXPECT_THROW(adam_step(p, m, 1, 0.01, TrainConfig{}), std::invalid_argument);
}

TEST(Trainer, LossDecreasesOnCopy) {
  auto train = tiny_train();
  train.train_steps = 200;
  train.eval_every = 1000;
  Trainer trainer(Model::initialize(tiny_model()), train, tiny_task());
  double first = 0.0, late = 0.0;
  for (int s = 0; s < 200; ++s) {
    const double loss = trainer.step();
    if (s < 10) first += loss / 10;
    if (s >= 190) late += loss / 10;
  }
  EXPECT_LT(late, first);
}

TEST(Trainer, TwoRunsAgreeBitExactly) {
  auto run = [] {
    Trainer t(Model::initialize(tiny_model()), tiny_train(), tiny_task());
    for (int s = 0; s < 5; ++s) t.step();
    return t.checkpoint();
  };
  auto a = run();
  auto b = run();
  for (const auto& [name, t] : a.params) EXPECT_TRUE(testing::bit_equal(t.data(), b.params.get(name).data())) << name;
}

TEST(Trainer, EvalCadenceAndFiles) {
  auto dir = scratch_dir("cadence");
  auto train = tiny_train();
  train.train_steps = 25;
  train.eval_every = 10;
  train.checkpoint_dir = dir.string();
  Trainer trainer(Model::initialize(tiny_model()), train, tiny_task());
  std::ostringstream log;
  auto records = trainer.run(&log);
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(records[0].step, 10);
  EXPECT_EQ(records[1].step, 20);
  EXPECT_EQ(trainer.current_step(), 25);
  std::istringstream lines(log.str());
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    EXPECT_EQ(MetricsRecord::parse_log_line(line).step, 10 * ++count);
  }
  EXPECT_EQ(count, 2);
  EXPECT_TRUE(fs::exists(dir / "metrics.log"));
  EXPECT_TRUE(fs::exists(dir / "ckpt-10.pnet"));
  EXPECT_TRUE(fs::exists(dir / "ckpt-20.pnet"));
}

TEST(Trainer, NonFiniteLossNamesTheStep) {
  Trainer trainer(Model::initialize(tiny_model()), tiny_train(), tiny_task());
  trainer.step();
  auto& w = const_cast<Model&>(trainer.model()).parameters().get("output.bias");
  w.mutable_data()[4] = std::nan("");
  try {
    trainer.step();
    FAIL() << "expected a non-finite loss error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("step 2"), std::string::npos) << e.what();
  }
}

TEST(Checkpoint, RoundTripIsBitExact) {
  auto dir = scratch_dir("roundtrip");
  Trainer trainer(Model::initialize(tiny_model()), tiny_train(), tiny_task());
  for (int s = 0; s < 3; ++s) trainer.step();
  auto ckpt = trainer.checkpoint();
  save_checkpoint(dir / "a.pnet", ckpt);
  auto back = load_checkpoint(dir / "a.pnet", tiny_model());
  EXPECT_EQ(back.step, 3);
  EXPECT_EQ(back.seed, ckpt.seed);
  ASSERT_EQ(back.params.size(), ckpt.params.size());
  for (const auto& [name, t] : ckpt.params) {
    EXPECT_EQ(back.params.get(name).shape(), t.shape());
    EXPECT_TRUE(testing::bit_equal(back.params.get(name).data(), t.data())) << name;
    EXPECT_TRUE(testing::bit_equal(back.moments.first.get(name).data(), ckpt.moments.first.get(name).data()));
    EXPECT_TRUE(testing::bit_equal(back.moments.second.get(name).data(), ckpt.moments.second.get(name).data()));
  }
  const Model before(ckpt.model, ckpt.params.clone());
  const Model after(back.model, std::move(back.params));
  const auto batch = trainer.batch_for_step(1);
  EXPECT_TRUE(testing::bit_equal(forward_train(before, batch.src, batch.tgt).data(),
                                 forward_train(after, batch.src, batch.tgt).data()));
}

TEST(Checkpoint, MismatchNamesField) {
  auto dir = scratch_dir("mismatch");
  Trainer trainer(Model::initialize(tiny_model()), tiny_train(), tiny_task());
  save_checkpoint(dir / "a.pnet", trainer.checkpoint());
  auto other = tiny_model();
  other.encoder.pe_per_layer = false;
  try {
    load_checkpoint(dir / "a.pnet", other);
    FAIL() << "expected a mismatch";
  } catch (const CheckpointMismatch& e) {
    EXPECT_NE(std::string(e.what()).find("encoder_pe_per_layer"), std::string::npos) << e.what();
  }
}

TEST(Checkpoint, CorruptFilesAreRejected) {
  auto dir = scratch_dir("corrupt");
  Trainer trainer(Model::initialize(tiny_model()), tiny_train(), tiny_task());
  save_checkpoint(dir / "a.pnet", trainer.checkpoint());
  std::ifstream in(dir / "a.pnet", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});

  auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream(dir / name, std::ios::binary) << content;
    return dir / name;
  };
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(load_checkpoint(write("magic.pnet", bad_magic)), CheckpointError);
  EXPECT_THROW(load_checkpoint(write("short.pnet", bytes.substr(0, bytes.size() - 9))), CheckpointError);
  EXPECT_THROW(load_checkpoint(write("long.pnet", bytes + "x")), CheckpointError);
  EXPECT_THROW(load_checkpoint(dir / "missing.pnet"), CheckpointError);
}

TEST(Checkpoint, ResumeMatchesUninterruptedRun) {
  auto dir = scratch_dir("resume");
  const auto train = tiny_train();
  Trainer straight(Model::initialize(tiny_model()), train, tiny_task());
  for (int s = 0; s < 15; ++s) straight.step();

  Trainer first(Model::initialize(tiny_model()), train, tiny_task());
  for (int s = 0; s < 5; ++s) first.step();
  save_checkpoint(dir / "mid.pnet", first.checkpoint());
  Trainer resumed(load_checkpoint(dir / "mid.pnet", tiny_model()), train, tiny_task());
  for (int s = 0; s < 10; ++s) resumed.step();

  auto a = straight.checkpoint();
  auto b = resumed.checkpoint();
  EXPECT_EQ(a.step, b.step);
  for (const auto& [name, t] : a.params) EXPECT_TRUE(testing::bit_equal(t.data(), b.params.get(name).data())) << name;
}

}  // namespace
}  // namespace posenet
