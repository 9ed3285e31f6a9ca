// Copyright 2026 The PoseNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "posenet/parameters.hpp"
#include "posenet/tensor.hpp"

namespace posenet {

struct GradCheckOptions {
  double step = 1e-4;
  double tolerance = 1e-3;
  // Denominator floor for the relative error, so gradients that are zero up
  // to round-off compare on an absolute scale.
  double floor = 1e-6;
};

struct GradCheckFailure {
  std::string name;
  std::int64_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst;  // "name[index]" of the largest error
  std::int64_t checked = 0;
  std::vector<GradCheckFailure> failures;

  bool passed() const { return failures.empty(); }
};

/// Compares backward() gradients of the scalar `loss` with central differences
/// (f(x+h) - f(x-h)) / 2h for every element of every tensor in `params`.
/// `loss` must be deterministic and build its graph from `params`.
GradCheckReport finite_diff_check(const std::function<Tensor()>& loss, Parameters& params,
                                  const GradCheckOptions& options = {});

}  // namespace posenet
