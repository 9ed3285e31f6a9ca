// Copyright 2026 The PoseNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "posenet/tensor.hpp"

namespace posenet {

enum class ParamInit { kUniform, kOnes, kZeros };

/// Inventory entry: uniform tensors are drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
struct ParamSpec {
  std::string name;
  Shape shape;
  ParamInit init = ParamInit::kUniform;
  std::int64_t fan_in = 1;
};

/// Named learnable tensors in insertion order.
class Parameters {
 public:
  using Entry = std::pair<std::string, Tensor>;

  /// Registers `value` (marked requires_grad) under a unique name.
  Tensor& add(std::string name, Tensor value);
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  bool contains(const std::string& name) const { return index_.contains(name); }

  std::size_t size() const { return entries_.size(); }
  std::int64_t element_count() const;

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }

  /// Deep copy with fresh storage.
  Parameters clone() const;
  void zero_grad();

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace posenet
