// Copyright 2026 The PoseNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "posenet/data.hpp"
#include "posenet/metrics.hpp"
#include "posenet/model.hpp"
#include "posenet/parameters.hpp"

namespace posenet {

struct TrainConfig {
  std::int64_t batch_size = 32;
  std::int64_t train_steps = 5000;
  std::int64_t eval_every = 2000;
  double lr_scale = 1.0;
  std::int64_t warmup_steps = 400;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double epsilon = 1e-9;
  double label_smoothing = 0.0;
  std::int64_t eval_examples = 256;
  double clip_norm = 0.0;  // global gradient-norm clip; 0 disables
  std::uint64_t seed = 1;
  std::string checkpoint_dir;  // empty: no files written

  void validate() const;
};

/// Mean over unpadded positions of -sum_j q_j log softmax(logits)_j, where q
/// puts 1 - s on the target and s / (V - 1) on every other id.
Tensor cross_entropy_loss(const Tensor& logits, const IdMatrix& targets, const Mask& pad_mask,
                          double label_smoothing = 0.0);

/// Negative unsmoothed mean cross-entropy.
double neg_log_perplexity(const Tensor& logits, const IdMatrix& targets, const Mask& pad_mask);

/// scale * d^-0.5 * min(step^-0.5, step * warmup^-1.5).
double lr_at(std::int64_t step, std::int64_t depth, std::int64_t warmup, double scale);

/// First and second moments, named like the parameters they track.
struct AdamState {
  Parameters first;
  Parameters second;
};

AdamState make_adam_state(const Parameters& params);

/// Bias-corrected Adam update from the gradients stored on `params`
/// (a tensor without a gradient is treated as having a zero gradient).
void adam_step(Parameters& params, AdamState& moments, std::int64_t step, double lr, const TrainConfig& cfg);

/// Scales all gradients so their global L2 norm is at most max_norm; returns
/// the norm before clipping.
double clip_gradients(Parameters& params, double max_norm);

struct Checkpoint {
  std::int64_t step = 0;
  ModelConfig model;
  Parameters params;
  AdamState moments;
  std::uint64_t seed = 0;  // training seed; batch streams are keyed by (seed, step)
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// Throws CheckpointMismatch naming the first field that differs from `expected`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CheckpointMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Owns the model and optimizer state for one training run. Step s draws its
/// batch from a stream keyed by (seed, s), so resuming from a checkpoint
/// reproduces an uninterrupted run bit for bit.
class Trainer {
 public:
  Trainer(Model model, TrainConfig train, TaskSpec task);
  /// Resumes from a checkpoint.
  Trainer(Checkpoint ckpt, TrainConfig train, TaskSpec task);

  /// One optimizer step; returns the pre-update training loss.
  double step();
  MetricsRecord evaluate() const;

  /// Runs to train_cfg.train_steps, evaluating every eval_every steps (log line
  /// to `log`, metrics.log and a checkpoint when checkpoint_dir is set).
  /// `on_eval` returning false stops early.
  std::vector<MetricsRecord> run(std::ostream* log = nullptr,
                                 const std::function<bool(const MetricsRecord&)>& on_eval = {});

  Checkpoint checkpoint() const;

  std::int64_t current_step() const { return step_; }
  const Model& model() const { return model_; }
  const std::vector<Example>& eval_set() const { return eval_set_; }
  const TrainConfig& train_config() const { return train_; }

  /// The batch used at step s.
  Batch batch_for_step(std::int64_t s) const;

 private:
  Model model_;
  TrainConfig train_;
  TaskSpec task_;
  AdamState moments_;
  std::int64_t step_ = 0;
  std::vector<Example> eval_set_;
};

}  // namespace posenet
