// Copyright 2026 The PoseNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "posenet/data.hpp"
#include "posenet/model.hpp"
#include "posenet/tensor.hpp"

namespace posenet {

/// One evaluation checkpoint.
struct MetricsRecord {
  std::int64_t step = 0;
  double loss = 0.0;
  double accuracy = 0.0;
  double accuracy_top5 = 0.0;
  double neg_log_perplexity = 0.0;
  double approx_bleu_score = 0.0;

  /// "step=.. loss=.. accuracy=.. accuracy_top5=.. neg_log_perplexity=.. approx_bleu_score=.."
  std::string to_log_line() const;
  static MetricsRecord parse_log_line(const std::string& line);
};

/// Field names in log-line order.
const std::vector<std::string>& metrics_field_names();

/// Fraction of unpadded positions whose target is among the k largest logits
/// (ties ranked toward the lower id).
double token_accuracy(const Tensor& logits, const IdMatrix& targets, const Mask& pad_mask, std::int64_t k);

/// Corpus BLEU over token ids with add-one smoothing on orders that have no
/// matches. Sequences must already be stripped of EOS/PAD.
double approx_bleu(const std::vector<Sequence>& candidates, const std::vector<Sequence>& references,
                   std::int64_t max_order = 4);

struct EvalOptions {
  std::int64_t batch_size = 32;
  double label_smoothing = 0.0;
  std::int64_t step = 0;
};

/// Teacher-forced loss/accuracy/perplexity plus greedy-decoding BLEU.
MetricsRecord evaluate(const Model& model, const std::vector<Example>& dataset, const EvalOptions& options = {});

}  // namespace posenet
