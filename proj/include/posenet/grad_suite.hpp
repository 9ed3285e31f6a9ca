// Copyright 2026 The PoseNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "posenet/gradcheck.hpp"

namespace posenet {

struct GradSuiteCase {
  std::string name;
  GradCheckReport report;
};

/// Finite-difference checks over every layer type plus a 1+1-layer model
/// (d=4, n=m=4). Deterministic for a given seed.
std::vector<GradSuiteCase> run_grad_suite(std::uint64_t seed = 7, const GradCheckOptions& options = {});

}  // namespace posenet
