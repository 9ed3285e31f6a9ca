// Copyright 2026 The PoseNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "posenet/data.hpp"
#include "posenet/model.hpp"
#include "posenet/training.hpp"

namespace posenet {

using Json = nlohmann::ordered_json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Model section. Shared fields (depth, kernel, heads, attention_mode, ffn
/// sizes) are stated once and copied into both stacks.
Json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const Json& j, std::uint64_t seed = 1);

Json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const Json& j, std::uint64_t seed = 1);

Json task_to_json(const TaskSpec& spec);
TaskSpec task_from_json(const Json& j, std::int64_t vocab_size, std::uint64_t seed = 1);

/// Everything one command needs, parsed from a single JSON document.
struct RunConfig {
  std::uint64_t seed = 1;
  ModelConfig model;
  TrainConfig train;
  TaskSpec task;
  // Each grid point holds overrides of model-section keys.
  std::vector<Json> ablation_grid;
};

/// Unknown keys anywhere are rejected with ConfigError.
RunConfig parse_run_config(const Json& doc);
Json read_config_document(const std::string& path);
RunConfig load_run_config(const std::string& path);
/// Fully resolved document (defaults expanded); parses back to the same RunConfig.
Json run_config_to_json(const RunConfig& cfg);

/// Default ablation grid: encoder_pe_per_layer x encoder_dilation.
std::vector<Json> default_ablation_grid();

/// Dotted path of the first differing leaf of two documents, or "" if equal.
std::string first_mismatch(const Json& expected, const Json& actual, const std::string& prefix = "");

}  // namespace posenet
