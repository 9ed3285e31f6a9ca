// Copyright 2026 The PoseNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "posenet/training.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "posenet/config.hpp"

namespace posenet {

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (warmup_steps < 1) throw std::invalid_argument("warmup_steps must be >= 1");
  if (eval_every < 1) throw std::invalid_argument("eval_every must be >= 1");
  if (train_steps < 0) throw std::invalid_argument("train_steps must be >= 0");
  if (eval_examples < 1) throw std::invalid_argument("eval_examples must be >= 1");
  if (label_smoothing < 0.0 || label_smoothing >= 1.0) throw std::invalid_argument("label_smoothing must be in [0, 1)");
  if (clip_norm < 0.0) throw std::invalid_argument("clip_norm must be >= 0");
}

namespace {

struct LossStats {
  double loss = 0.0;
  double nll = 0.0;
  std::int64_t count = 0;
};

void check_targets(const Tensor& logits, const IdMatrix& targets, const Mask& mask) {
  if (logits.rank() != 3 || logits.dim(0) != targets.rows() || logits.dim(1) != targets.cols()) {
    throw std::invalid_argument("logits " + shape_string(logits.shape()) + " do not match targets [" +
                                std::to_string(targets.rows()) + "," + std::to_string(targets.cols()) + "]");
  }
  if (mask.shape() != Shape{targets.rows(), targets.cols()}) throw std::invalid_argument("target mask shape mismatch");
  const auto v = logits.dim(2);
  for (std::int64_t i = 0; i < targets.rows() * targets.cols(); ++i) {
    if (!mask[i]) continue;
    const auto t = targets.flat()[static_cast<std::size_t>(i)];
    if (t < 0 || t >= v) throw std::out_of_range("target id " + std::to_string(t) + " outside vocabulary");
  }
  if (mask.count() == 0) throw std::invalid_argument("every target position is padded");
}

// log-softmax per unpadded row; fills `log_probs` for those rows.
LossStats loss_stats(const Tensor& logits, const IdMatrix& targets, const Mask& mask, double smoothing,
                     std::vector<double>* log_probs) {
  const auto v = logits.dim(2);
  const auto data = logits.data();
  const double off = v > 1 ? smoothing / static_cast<double>(v - 1) : 0.0;
  LossStats stats;
  for (std::int64_t i = 0; i < targets.rows() * targets.cols(); ++i) {
    if (!mask[i]) continue;
    const double* row = data.data() + i * v;
    const double max_v = *std::max_element(row, row + v);
    double total = 0.0;
    for (std::int64_t j = 0; j < v; ++j) total += std::exp(row[j] - max_v);
    const double log_z = max_v + std::log(total);
    const auto t = targets.flat()[static_cast<std::size_t>(i)];
    double row_loss = 0.0;
    for (std::int64_t j = 0; j < v; ++j) {
      const double lp = row[j] - log_z;
      if (log_probs) (*log_probs)[static_cast<std::size_t>(i * v + j)] = lp;
      const double q = j == t ? 1.0 - smoothing : off;
      if (q != 0.0) row_loss -= q * lp;
    }
    stats.loss += row_loss;
    stats.nll -= row[t] - log_z;
    ++stats.count;
  }
  return stats;
}

}  // namespace

Tensor cross_entropy_loss(const Tensor& logits, const IdMatrix& targets, const Mask& pad_mask, double label_smoothing) {
  check_targets(logits, targets, pad_mask);
  const auto v = logits.dim(2);
  std::vector<double> log_probs(static_cast<std::size_t>(logits.numel()), 0.0);
  const auto stats = loss_stats(logits, targets, pad_mask, label_smoothing, &log_probs);
  const double value = stats.loss / static_cast<double>(stats.count);

  auto li = logits.impl();
  return detail::make_result(
      "cross_entropy", {}, {value}, {&logits},
      [li, targets, pad_mask, log_probs = std::move(log_probs), v, label_smoothing,
       count = stats.count](const TensorImpl& o) {
        if (!li->requires_grad) return;
        auto& g = detail::grad_buffer(*li);
        const double scale = o.grad[0] / static_cast<double>(count);
        const double off = v > 1 ? label_smoothing / static_cast<double>(v - 1) : 0.0;
        for (std::int64_t i = 0; i < targets.rows() * targets.cols(); ++i) {
          if (!pad_mask[i]) continue;
          const auto t = targets.flat()[static_cast<std::size_t>(i)];
          for (std::int64_t j = 0; j < v; ++j) {
            const auto k = static_cast<std::size_t>(i * v + j);
            const double q = j == t ? 1.0 - label_smoothing : off;
            g[k] += scale * (std::exp(log_probs[k]) - q);
          }
        }
      });
}

double neg_log_perplexity(const Tensor& logits, const IdMatrix& targets, const Mask& pad_mask) {
  check_targets(logits, targets, pad_mask);
  const auto stats = loss_stats(logits, targets, pad_mask, 0.0, nullptr);
  return -stats.nll / static_cast<double>(stats.count);
}

double lr_at(std::int64_t step, std::int64_t depth, std::int64_t warmup, double scale) {
  if (step < 1) throw std::invalid_argument("learning-rate schedule starts at step 1");
  const auto s = static_cast<double>(step);
  return scale / std::sqrt(static_cast<double>(depth)) *
         std::min(1.0 / std::sqrt(s), s * std::pow(static_cast<double>(warmup), -1.5));
}

AdamState make_adam_state(const Parameters& params) {
  AdamState state;
  for (const auto& [name, t] : params) {
    state.first.add(name, Tensor::zeros(t.shape())).set_requires_grad(false);
    state.second.add(name, Tensor::zeros(t.shape())).set_requires_grad(false);
  }
  return state;
}

void adam_step(Parameters& params, AdamState& moments, std::int64_t step, double lr, const TrainConfig& cfg) {
  if (moments.first.size() != params.size() || moments.second.size() != params.size()) {
    throw std::invalid_argument("optimizer state does not match the parameter inventory");
  }
  if (step < 1) throw std::invalid_argument("adam step counter starts at 1");
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  auto m_it = moments.first.begin();
  auto v_it = moments.second.begin();
  for (auto& [name, t] : params) {
    if (m_it->first != name || v_it->first != name || m_it->second.shape() != t.shape()) {
      throw std::invalid_argument("optimizer state entry '" + m_it->first + "' does not match parameter '" + name + "'");
    }
    auto w = t.mutable_data();
    auto m = m_it->second.mutable_data();
    auto v = v_it->second.mutable_data();
    const auto g = t.grad();
    const bool has_grad = !g.empty();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = has_grad ? g[i] : 0.0;
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.epsilon);
    }
    ++m_it;
    ++v_it;
  }
}

double clip_gradients(Parameters& params, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, t] : params) {
    for (double g : t.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double f = max_norm / norm;
    for (auto& [name, t] : params) {
      if (!t.has_grad()) continue;
      auto& g = t.impl()->grad;
      for (double& x : g) x *= f;
    }
  }
  return norm;
}

namespace {

constexpr char kMagic[4] = {'P', 'N', 'E', 'T'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T take(std::istream& is, const std::string& what) {
  T value{};
  if (!is.read(reinterpret_cast<char*>(&value), sizeof(T))) throw CheckpointError("truncated checkpoint reading " + what);
  return value;
}

void put_tensor(std::ostream& os, const std::string& name, const Tensor& t) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
  for (auto e : t.shape()) put<std::uint64_t>(os, static_cast<std::uint64_t>(e));
  const auto data = t.data();
  os.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
}

std::pair<std::string, Tensor> take_tensor(std::istream& is) {
  const auto name_len = take<std::uint32_t>(is, "tensor name length");
  if (name_len > (1u << 16)) throw CheckpointError("implausible tensor name length");
  std::string name(name_len, '\0');
  if (!is.read(name.data(), name_len)) throw CheckpointError("truncated checkpoint reading tensor name");
  const auto rank = take<std::uint32_t>(is, "rank of " + name);
  if (rank > 8) throw CheckpointError("implausible rank for tensor '" + name + "'");
  Shape shape;
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    const auto e = take<std::uint64_t>(is, "extent of " + name);
    if (e > (1ull << 32)) throw CheckpointError("implausible extent for tensor '" + name + "'");
    shape.push_back(static_cast<std::int64_t>(e));
    count *= e;
  }
  if (count > (1ull << 31)) throw CheckpointError("tensor '" + name + "' is too large");
  std::vector<double> data(count);
  if (!is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(count * sizeof(double)))) {
    throw CheckpointError("truncated checkpoint reading data of '" + name + "'");
  }
  return {std::move(name), Tensor(std::move(shape), std::move(data))};
}

const char* kFirstMoment = "adam.m/";
const char* kSecondMoment = "adam.v/";

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  Json header;
  header["step"] = ckpt.step;
  header["seed"] = ckpt.seed;
  header["model"] = model_config_to_json(ckpt.model);
  header["tensor_count"] = ckpt.params.size() + ckpt.moments.first.size() + ckpt.moments.second.size();
  const std::string text = header.dump();

  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw CheckpointError("cannot write checkpoint '" + tmp + "'");
    os.write(kMagic, 4);
    put<std::uint32_t>(os, kCheckpointVersion);
    put<std::uint64_t>(os, static_cast<std::uint64_t>(text.size()));
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, t] : ckpt.params) put_tensor(os, name, t);
    for (const auto& [name, t] : ckpt.moments.first) put_tensor(os, kFirstMoment + name, t);
    for (const auto& [name, t] : ckpt.moments.second) put_tensor(os, kSecondMoment + name, t);
    if (!os) throw CheckpointError("failed writing checkpoint '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw CheckpointError("bad checkpoint magic");
  const auto version = take<std::uint32_t>(is, "version");
  if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto len = take<std::uint64_t>(is, "config length");
  if (len > (1ull << 24)) throw CheckpointError("implausible config block length");
  std::string text(len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(len))) throw CheckpointError("truncated config block");
  Json header;
  try {
    header = Json::parse(text);
  } catch (const nlohmann::json::exception&) {
    throw CheckpointError("corrupt checkpoint config block");
  }

  Checkpoint ckpt;
  std::size_t tensor_count = 0;
  try {
    ckpt.step = header.at("step").get<std::int64_t>();
    ckpt.seed = header.at("seed").get<std::uint64_t>();
    ckpt.model = model_config_from_json(header.at("model"));
    tensor_count = header.at("tensor_count").get<std::size_t>();
  } catch (const nlohmann::json::exception&) {
    throw CheckpointError("checkpoint config block is missing fields");
  }
  ckpt.model.seed = ckpt.seed;

  for (std::size_t i = 0; i < tensor_count; ++i) {
    auto [name, t] = take_tensor(is);
    if (name.starts_with(kFirstMoment)) {
      ckpt.moments.first.add(name.substr(std::strlen(kFirstMoment)), std::move(t)).set_requires_grad(false);
    } else if (name.starts_with(kSecondMoment)) {
      ckpt.moments.second.add(name.substr(std::strlen(kSecondMoment)), std::move(t)).set_requires_grad(false);
    } else {
      ckpt.params.add(name, std::move(t));
    }
  }
  if (is.peek() != std::char_traits<char>::eof()) throw CheckpointError("trailing bytes after the last tensor");
  return ckpt;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
  auto ckpt = load_checkpoint(path);
  const auto field = first_mismatch(model_config_to_json(expected), model_config_to_json(ckpt.model));
  if (!field.empty()) throw CheckpointMismatch("checkpoint model config differs at '" + field + "'");
  return ckpt;
}

Trainer::Trainer(Model model, TrainConfig train, TaskSpec task)
    : model_(std::move(model)), train_(std::move(train)), task_(task), moments_(make_adam_state(model_.parameters())) {
  train_.validate();
  task_.validate();
  TaskSpec eval_task = task_;
  eval_set_ = generate_corpus(eval_task, train_.eval_examples, kEvalStream);
}

Trainer::Trainer(Checkpoint ckpt, TrainConfig train, TaskSpec task)
    : model_(ckpt.model, std::move(ckpt.params)), train_(std::move(train)), task_(task),
      moments_(std::move(ckpt.moments)), step_(ckpt.step) {
  train_.validate();
  task_.validate();
  if (moments_.first.size() != model_.parameters().size()) {
    throw CheckpointError("checkpoint optimizer state does not match its parameters");
  }
  eval_set_ = generate_corpus(task_, train_.eval_examples, kEvalStream);
}

Batch Trainer::batch_for_step(std::int64_t s) const {
  Rng rng(derive_seed(train_.seed, kTrainStream, static_cast<std::uint64_t>(s)));
  std::vector<Example> examples;
  examples.reserve(static_cast<std::size_t>(train_.batch_size));
  for (std::int64_t i = 0; i < train_.batch_size; ++i) examples.push_back(generate_pair(task_, rng));
  return make_batch(examples, model_.config().max_length);
}

double Trainer::step() {
  const auto s = step_ + 1;
  const auto batch = batch_for_step(s);
  auto& params = model_.parameters();
  params.zero_grad();
  double loss_value = 0.0;
  {
    Graph graph;
    GraphScope scope(graph);
    auto logits = forward_train(model_, batch.src, batch.tgt);
    auto loss = cross_entropy_loss(logits, batch.tgt, batch.tgt_mask, train_.label_smoothing);
    loss_value = loss.item();
    if (!std::isfinite(loss_value)) {
      throw std::runtime_error("non-finite training loss at step " + std::to_string(s));
    }
    graph.backward(loss);
  }
  if (train_.clip_norm > 0.0) clip_gradients(params, train_.clip_norm);
  adam_step(params, moments_, s, lr_at(s, model_.config().depth, train_.warmup_steps, train_.lr_scale), train_);
  params.zero_grad();
  step_ = s;
  return loss_value;
}

MetricsRecord Trainer::evaluate() const {
  EvalOptions options;
  options.batch_size = train_.batch_size;
  options.label_smoothing = train_.label_smoothing;
  options.step = step_;
  return posenet::evaluate(model_, eval_set_, options);
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ckpt;
  ckpt.step = step_;
  ckpt.model = model_.config();
  ckpt.params = model_.parameters().clone();
  ckpt.moments.first = moments_.first.clone();
  ckpt.moments.second = moments_.second.clone();
  ckpt.seed = train_.seed;
  return ckpt;
}

std::vector<MetricsRecord> Trainer::run(std::ostream* log, const std::function<bool(const MetricsRecord&)>& on_eval) {
  std::vector<MetricsRecord> records;
  std::ofstream metrics_file;
  const bool write_files = !train_.checkpoint_dir.empty();
  if (write_files) {
    std::filesystem::create_directories(train_.checkpoint_dir);
    metrics_file.open(std::filesystem::path(train_.checkpoint_dir) / "metrics.log", std::ios::app);
  }
  while (step_ < train_.train_steps) {
    step();
    if (step_ % train_.eval_every != 0) continue;
    auto record = evaluate();
    records.push_back(record);
    const auto line = record.to_log_line();
    if (log) *log << line << std::endl;
    if (write_files) {
      metrics_file << line << '\n' << std::flush;
      const auto dir = std::filesystem::path(train_.checkpoint_dir);
      save_checkpoint(dir / ("ckpt-" + std::to_string(step_) + ".pnet"), checkpoint());
      save_checkpoint(dir / "latest.pnet", checkpoint());
    }
    if (on_eval && !on_eval(record)) break;
  }
  return records;
}

}  // namespace posenet
