// Copyright 2026 The PoseNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "posenet/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

#include "posenet/training.hpp"

namespace posenet {

const std::vector<std::string>& metrics_field_names() {
  static const std::vector<std::string> names = {"step",          "loss",
                                                 "accuracy",      "accuracy_top5",
                                                 "neg_log_perplexity", "approx_bleu_score"};
  return names;
}

std::string MetricsRecord::to_log_line() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "step=%lld loss=%.6f accuracy=%.6f accuracy_top5=%.6f neg_log_perplexity=%.6f "
                "approx_bleu_score=%.6f",
                static_cast<long long>(step), loss, accuracy, accuracy_top5, neg_log_perplexity, approx_bleu_score);
  return buf;
}

MetricsRecord MetricsRecord::parse_log_line(const std::string& line) {
  std::istringstream is(line);
  std::map<std::string, std::string> fields;
  std::string item;
  while (is >> item) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("metrics field without '=': " + item);
    fields[item.substr(0, eq)] = item.substr(eq + 1);
  }
  for (const auto& name : metrics_field_names()) {
    if (!fields.contains(name)) throw std::invalid_argument("metrics line is missing '" + name + "'");
  }
  if (fields.size() != metrics_field_names().size()) throw std::invalid_argument("metrics line has extra fields");
  MetricsRecord r;
  r.step = std::stoll(fields["step"]);
  r.loss = std::stod(fields["loss"]);
  r.accuracy = std::stod(fields["accuracy"]);
  r.accuracy_top5 = std::stod(fields["accuracy_top5"]);
  r.neg_log_perplexity = std::stod(fields["neg_log_perplexity"]);
  r.approx_bleu_score = std::stod(fields["approx_bleu_score"]);
  return r;
}

double token_accuracy(const Tensor& logits, const IdMatrix& targets, const Mask& pad_mask, std::int64_t k) {
  if (k < 1) throw std::invalid_argument("top-k accuracy needs k >= 1");
  if (logits.rank() != 3 || logits.dim(0) != targets.rows() || logits.dim(1) != targets.cols()) {
    throw std::invalid_argument("logits " + shape_string(logits.shape()) + " do not match targets");
  }
  const auto v = logits.dim(2);
  const auto data = logits.data();
  std::int64_t hits = 0;
  std::int64_t total = 0;
  for (std::int64_t r = 0; r < targets.rows(); ++r) {
    for (std::int64_t c = 0; c < targets.cols(); ++c) {
      const auto pos = r * targets.cols() + c;
      if (!pad_mask[pos]) continue;
      const auto t = targets(r, c);
      const double* row = data.data() + pos * v;
      std::int64_t ahead = 0;  // ids ranked above the target
      for (std::int64_t j = 0; j < v; ++j) {
        if (row[j] > row[t] || (row[j] == row[t] && j < t)) ++ahead;
      }
      ++total;
      if (ahead < k) ++hits;
    }
  }
  if (total == 0) throw std::invalid_argument("accuracy over zero unpadded positions");
  return static_cast<double>(hits) / static_cast<double>(total);
}

double approx_bleu(const std::vector<Sequence>& candidates, const std::vector<Sequence>& references,
                   std::int64_t max_order) {
  if (candidates.size() != references.size()) {
    throw std::invalid_argument("BLEU needs as many references as candidates");
  }
  if (max_order < 1) throw std::invalid_argument("BLEU max_order must be >= 1");
  std::vector<std::int64_t> matches(static_cast<std::size_t>(max_order), 0);
  std::vector<std::int64_t> totals(static_cast<std::size_t>(max_order), 0);
  std::int64_t cand_len = 0;
  std::int64_t ref_len = 0;
  for (std::size_t s = 0; s < candidates.size(); ++s) {
    const auto& cand = candidates[s];
    const auto& ref = references[s];
    cand_len += static_cast<std::int64_t>(cand.size());
    ref_len += static_cast<std::int64_t>(ref.size());
    for (std::int64_t n = 1; n <= max_order; ++n) {
      std::map<Sequence, std::int64_t> ref_counts;
      for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= ref.size(); ++i) {
        ++ref_counts[Sequence(ref.begin() + static_cast<std::ptrdiff_t>(i),
                              ref.begin() + static_cast<std::ptrdiff_t>(i) + n)];
      }
      std::map<Sequence, std::int64_t> cand_counts;
      for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= cand.size(); ++i) {
        ++cand_counts[Sequence(cand.begin() + static_cast<std::ptrdiff_t>(i),
                               cand.begin() + static_cast<std::ptrdiff_t>(i) + n)];
        ++totals[static_cast<std::size_t>(n - 1)];
      }
      for (const auto& [gram, count] : cand_counts) {
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) matches[static_cast<std::size_t>(n - 1)] += std::min(count, it->second);
      }
    }
  }
  if (cand_len == 0) return 0.0;
  double log_sum = 0.0;
  for (std::int64_t n = 0; n < max_order; ++n) {
    const auto m = static_cast<double>(matches[static_cast<std::size_t>(n)]);
    const auto t = static_cast<double>(totals[static_cast<std::size_t>(n)]);
    const double p = m > 0 ? m / t : (m + 1.0) / (t + 1.0);
    log_sum += std::log(p);
  }
  const double bp = std::min(1.0, std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len)));
  return bp * std::exp(log_sum / static_cast<double>(max_order));
}

MetricsRecord evaluate(const Model& model, const std::vector<Example>& dataset, const EvalOptions& options) {
  if (dataset.empty()) throw std::invalid_argument("evaluation dataset is empty");
  if (options.batch_size < 1) throw std::invalid_argument("evaluation batch size must be >= 1");
  double loss_sum = 0.0;
  double nlp_sum = 0.0;
  double acc_sum = 0.0;
  double top5_sum = 0.0;
  double positions = 0.0;
  std::vector<Sequence> candidates;
  std::vector<Sequence> references;
  const auto max_len = model.config().max_length;
  for (std::size_t start = 0; start < dataset.size(); start += static_cast<std::size_t>(options.batch_size)) {
    const auto stop = std::min(dataset.size(), start + static_cast<std::size_t>(options.batch_size));
    std::vector<Example> chunk(dataset.begin() + static_cast<std::ptrdiff_t>(start),
                               dataset.begin() + static_cast<std::ptrdiff_t>(stop));
    const auto batch = make_batch(chunk, max_len);
    const auto logits = forward_train(model, batch.src, batch.tgt);
    const auto count = static_cast<double>(batch.tgt_mask.count());
    loss_sum += count * cross_entropy_loss(logits, batch.tgt, batch.tgt_mask, options.label_smoothing).item();
    nlp_sum += count * neg_log_perplexity(logits, batch.tgt, batch.tgt_mask);
    acc_sum += count * token_accuracy(logits, batch.tgt, batch.tgt_mask, 1);
    top5_sum += count * token_accuracy(logits, batch.tgt, batch.tgt_mask, 5);
    positions += count;

    for (const auto& out : greedy_generate(model, batch.src, max_len)) candidates.push_back(strip(out));
    for (const auto& ex : chunk) references.push_back(ex.tgt);
  }
  MetricsRecord record;
  record.step = options.step;
  record.loss = loss_sum / positions;
  record.neg_log_perplexity = nlp_sum / positions;
  record.accuracy = acc_sum / positions;
  record.accuracy_top5 = top5_sum / positions;
  record.approx_bleu_score = approx_bleu(candidates, references);
  return record;
}

}  // namespace posenet
