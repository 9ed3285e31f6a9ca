// Copyright 2026 The PoseNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "posenet/config.hpp"

#include <fstream>
#include <set>

namespace posenet {

namespace {

void reject_unknown(const Json& j, const std::set<std::string>& allowed, const std::string& section) {
  if (!j.is_object()) throw ConfigError("config section '" + section + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) throw ConfigError("unknown key '" + key + "' in section '" + section + "'");
  }
}

template <typename T>
T read(const Json& j, const char* key, T fallback, const std::string& section) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("bad value for '" + section + "." + key + "'");
  }
}

std::string attention_mode_name(AttentionMode mode) { return mode == AttentionMode::kProjected ? "projected" : "plain"; }

AttentionMode parse_attention_mode(const std::string& name) {
  if (name == "plain") return AttentionMode::kPlain;
  if (name == "projected") return AttentionMode::kProjected;
  throw ConfigError("unknown attention_mode '" + name + "'");
}

const std::set<std::string> kModelKeys = {
    "vocab_size",          "depth",          "max_length",           "kernel",
    "heads",               "attention_mode", "tie_embeddings",       "encoder_layers",
    "decoder_layers",      "encoder_pe_per_layer", "encoder_dilation", "encoder_dilations",
    "encoder_self_attention", "decoder_self_attention", "decoder_pe_once", "ffn_hidden",
    "ffn_layers"};

}  // namespace

Json model_config_to_json(const ModelConfig& cfg) {
  Json j;
  j["vocab_size"] = cfg.vocab_size;
  j["depth"] = cfg.depth;
  j["max_length"] = cfg.max_length;
  j["kernel"] = cfg.encoder.kernel;
  j["heads"] = cfg.encoder.attention.heads;
  j["attention_mode"] = attention_mode_name(cfg.encoder.attention.mode);
  j["tie_embeddings"] = cfg.tie_embeddings;
  j["encoder_layers"] = cfg.encoder.num_layers;
  j["decoder_layers"] = cfg.decoder.num_layers;
  j["encoder_pe_per_layer"] = cfg.encoder.pe_per_layer;
  j["encoder_dilation"] = cfg.encoder.use_dilation;
  j["encoder_dilations"] = cfg.encoder.dilations;
  j["encoder_self_attention"] = cfg.encoder.self_attention;
  j["decoder_self_attention"] = cfg.decoder.self_attention;
  j["decoder_pe_once"] = cfg.decoder.apply_pe_once;
  j["ffn_hidden"] = cfg.encoder.ffn_hidden_size();
  j["ffn_layers"] = cfg.encoder.ffn_layers;
  return j;
}

ModelConfig model_config_from_json(const Json& j, std::uint64_t seed) {
  reject_unknown(j, kModelKeys, "model");
  const std::string s = "model";
  ModelConfig cfg;
  cfg.seed = seed;
  cfg.vocab_size = read<std::int64_t>(j, "vocab_size", cfg.vocab_size, s);
  cfg.depth = read<std::int64_t>(j, "depth", cfg.depth, s);
  cfg.max_length = read<std::int64_t>(j, "max_length", cfg.max_length, s);
  cfg.tie_embeddings = read<bool>(j, "tie_embeddings", cfg.tie_embeddings, s);

  AttentionConfig attention;
  attention.heads = read<std::int64_t>(j, "heads", attention.heads, s);
  attention.mode = parse_attention_mode(read<std::string>(j, "attention_mode", "plain", s));
  const auto kernel = read<std::int64_t>(j, "kernel", 3, s);
  const auto ffn_hidden = read<std::int64_t>(j, "ffn_hidden", 0, s);
  const auto ffn_layers = read<std::int64_t>(j, "ffn_layers", 2, s);

  auto& enc = cfg.encoder;
  enc.depth = cfg.depth;
  enc.kernel = kernel;
  enc.attention = attention;
  enc.ffn_hidden = ffn_hidden;
  enc.ffn_layers = ffn_layers;
  enc.num_layers = read<std::int64_t>(j, "encoder_layers", enc.num_layers, s);
  enc.pe_per_layer = read<bool>(j, "encoder_pe_per_layer", enc.pe_per_layer, s);
  enc.use_dilation = read<bool>(j, "encoder_dilation", enc.use_dilation, s);
  enc.dilations = read<std::vector<std::int64_t>>(j, "encoder_dilations", enc.dilations, s);
  enc.self_attention = read<bool>(j, "encoder_self_attention", enc.self_attention, s);

  auto& dec = cfg.decoder;
  dec.depth = cfg.depth;
  dec.kernel = kernel;
  dec.attention = attention;
  dec.ffn_hidden = ffn_hidden;
  dec.ffn_layers = ffn_layers;
  dec.num_layers = read<std::int64_t>(j, "decoder_layers", dec.num_layers, s);
  dec.self_attention = read<bool>(j, "decoder_self_attention", dec.self_attention, s);
  dec.apply_pe_once = read<bool>(j, "decoder_pe_once", dec.apply_pe_once, s);

  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid model config: ") + e.what());
  }
  return cfg;
}

Json train_config_to_json(const TrainConfig& cfg) {
  Json j;
  j["batch_size"] = cfg.batch_size;
  j["train_steps"] = cfg.train_steps;
  j["eval_every"] = cfg.eval_every;
  j["lr_scale"] = cfg.lr_scale;
  j["warmup_steps"] = cfg.warmup_steps;
  j["beta1"] = cfg.beta1;
  j["beta2"] = cfg.beta2;
  j["epsilon"] = cfg.epsilon;
  j["label_smoothing"] = cfg.label_smoothing;
  j["eval_examples"] = cfg.eval_examples;
  j["clip_norm"] = cfg.clip_norm;
  j["checkpoint_dir"] = cfg.checkpoint_dir;
  return j;
}

TrainConfig train_config_from_json(const Json& j, std::uint64_t seed) {
  reject_unknown(j, {"batch_size", "train_steps", "eval_every", "lr_scale", "warmup_steps", "beta1", "beta2",
                     "epsilon", "label_smoothing", "eval_examples", "clip_norm", "checkpoint_dir"},
                 "train");
  const std::string s = "train";
  TrainConfig cfg;
  cfg.seed = seed;
  cfg.batch_size = read<std::int64_t>(j, "batch_size", cfg.batch_size, s);
  cfg.train_steps = read<std::int64_t>(j, "train_steps", cfg.train_steps, s);
  cfg.eval_every = read<std::int64_t>(j, "eval_every", cfg.eval_every, s);
  cfg.lr_scale = read<double>(j, "lr_scale", cfg.lr_scale, s);
  cfg.warmup_steps = read<std::int64_t>(j, "warmup_steps", cfg.warmup_steps, s);
  cfg.beta1 = read<double>(j, "beta1", cfg.beta1, s);
  cfg.beta2 = read<double>(j, "beta2", cfg.beta2, s);
  cfg.epsilon = read<double>(j, "epsilon", cfg.epsilon, s);
  cfg.label_smoothing = read<double>(j, "label_smoothing", cfg.label_smoothing, s);
  cfg.eval_examples = read<std::int64_t>(j, "eval_examples", cfg.eval_examples, s);
  cfg.clip_norm = read<double>(j, "clip_norm", cfg.clip_norm, s);
  cfg.checkpoint_dir = read<std::string>(j, "checkpoint_dir", cfg.checkpoint_dir, s);
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid train config: ") + e.what());
  }
  return cfg;
}

Json task_to_json(const TaskSpec& spec) {
  Json j;
  j["kind"] = task_kind_name(spec.kind);
  j["rotate"] = spec.rotate;
  j["symbols"] = spec.symbols;
  j["min_length"] = spec.min_length;
  j["max_length"] = spec.max_length;
  return j;
}

TaskSpec task_from_json(const Json& j, std::int64_t vocab_size, std::uint64_t seed) {
  reject_unknown(j, {"kind", "rotate", "symbols", "min_length", "max_length"}, "task");
  const std::string s = "task";
  TaskSpec spec;
  spec.seed = seed;
  try {
    spec.kind = parse_task_kind(read<std::string>(j, "kind", task_kind_name(spec.kind), s));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  spec.rotate = read<std::int64_t>(j, "rotate", spec.rotate, s);
  spec.symbols = read<std::int64_t>(j, "symbols", vocab_size - token::kFirstSymbol, s);
  spec.min_length = read<std::int64_t>(j, "min_length", spec.min_length, s);
  spec.max_length = read<std::int64_t>(j, "max_length", spec.max_length, s);
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid task: ") + e.what());
  }
  if (spec.symbols > vocab_size - token::kFirstSymbol) {
    throw ConfigError("task uses more symbols than the vocabulary holds");
  }
  return spec;
}

std::vector<Json> default_ablation_grid() {
  std::vector<Json> grid;
  for (bool pe : {true, false}) {
    for (bool dilation : {true, false}) {
      Json point;
      point["encoder_pe_per_layer"] = pe;
      point["encoder_dilation"] = dilation;
      grid.push_back(point);
    }
  }
  return grid;
}

RunConfig parse_run_config(const Json& doc) {
  reject_unknown(doc, {"seed", "model", "train", "task", "ablate"}, "<root>");
  RunConfig cfg;
  cfg.seed = read<std::uint64_t>(doc, "seed", cfg.seed, "<root>");
  const Json empty = Json::object();
  cfg.model = model_config_from_json(doc.contains("model") ? doc["model"] : empty, cfg.seed);
  cfg.train = train_config_from_json(doc.contains("train") ? doc["train"] : empty, cfg.seed);
  cfg.task = task_from_json(doc.contains("task") ? doc["task"] : empty, cfg.model.vocab_size, cfg.seed);
  if (cfg.task.max_length + 1 > cfg.model.max_length) {
    throw ConfigError("task max_length + EOS exceeds model max_length");
  }
  cfg.ablation_grid = default_ablation_grid();
  if (doc.contains("ablate")) {
    const auto& ab = doc["ablate"];
    reject_unknown(ab, {"grid"}, "ablate");
    if (ab.contains("grid")) {
      if (!ab["grid"].is_array() || ab["grid"].empty()) throw ConfigError("ablate.grid must be a non-empty array");
      cfg.ablation_grid.clear();
      for (const auto& point : ab["grid"]) {
        reject_unknown(point, kModelKeys, "ablate.grid");
        cfg.ablation_grid.push_back(point);
      }
    }
  }
  return cfg;
}

Json read_config_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
}

RunConfig load_run_config(const std::string& path) { return parse_run_config(read_config_document(path)); }

Json run_config_to_json(const RunConfig& cfg) {
  Json j;
  j["seed"] = cfg.seed;
  j["model"] = model_config_to_json(cfg.model);
  j["train"] = train_config_to_json(cfg.train);
  j["task"] = task_to_json(cfg.task);
  j["ablate"]["grid"] = cfg.ablation_grid;
  return j;
}

std::string first_mismatch(const Json& expected, const Json& actual, const std::string& prefix) {
  if (expected.is_object() && actual.is_object()) {
    for (const auto& [key, value] : expected.items()) {
      const auto path = prefix.empty() ? key : prefix + "." + key;
      if (!actual.contains(key)) return path;
      auto inner = first_mismatch(value, actual[key], path);
      if (!inner.empty()) return inner;
    }
    for (const auto& [key, value] : actual.items()) {
      if (!expected.contains(key)) return prefix.empty() ? key : prefix + "." + key;
    }
    return "";
  }
  return expected == actual ? "" : (prefix.empty() ? std::string("<root>") : prefix);
}

}  // namespace posenet
