// Copyright 2026 The PoseNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "posenet/parameters.hpp"

#include <stdexcept>

namespace posenet {

Tensor& Parameters::add(std::string name, Tensor value) {
  if (index_.contains(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
  value.set_requires_grad(true);
  index_.emplace(name, entries_.size());
  entries_.emplace_back(std::move(name), std::move(value));
  return entries_.back().second;
}

const Tensor& Parameters::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return entries_[it->second].second;
}

Tensor& Parameters::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return entries_[it->second].second;
}

std::int64_t Parameters::element_count() const {
  std::int64_t total = 0;
  for (const auto& [name, t] : entries_) total += t.numel();
  return total;
}

Parameters Parameters::clone() const {
  Parameters out;
  for (const auto& [name, t] : entries_) {
    auto copy = t.detach();
    copy.set_requires_grad(t.requires_grad());
    out.entries_.emplace_back(name, std::move(copy));
    out.index_.emplace(name, out.entries_.size() - 1);
  }
  return out;
}

void Parameters::zero_grad() {
  for (auto& [name, t] : entries_) t.zero_grad();
}

}  // namespace posenet
