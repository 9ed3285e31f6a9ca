// Copyright 2026 The PoseNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "posenet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace posenet {

GradCheckReport finite_diff_check(const std::function<Tensor()>& loss, Parameters& params,
                                  const GradCheckOptions& options) {
  params.zero_grad();
  std::vector<std::vector<double>> analytic;
  {
    Graph graph;
    GraphScope scope(graph);
    graph.backward(loss());
  }
  for (const auto& [name, t] : params) {
    if (t.has_grad()) {
      analytic.emplace_back(t.grad().begin(), t.grad().end());
    } else {
      analytic.emplace_back(static_cast<std::size_t>(t.numel()), 0.0);
    }
  }
  params.zero_grad();

  GradCheckReport report;
  std::size_t which = 0;
  for (auto& [name, t] : params) {
    auto values = t.mutable_data();
    const auto& grads = analytic[which++];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + options.step;
      const double up = loss().item();
      values[i] = original - options.step;
      const double down = loss().item();
      values[i] = original;

      const double numeric = (up - down) / (2.0 * options.step);
      const double a = grads[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.checked;
      if (!(rel <= report.max_rel_error)) {
        report.max_rel_error = rel;
        report.worst = name + "[" + std::to_string(i) + "]";
      }
      if (!(rel < options.tolerance)) {
        report.failures.push_back({name, static_cast<std::int64_t>(i), a, numeric, rel});
      }
    }
  }
  return report;
}

}  // namespace posenet
