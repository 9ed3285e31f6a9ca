// Copyright 2026 The PoseNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace posenet {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // also: gradcheck failure
inline constexpr int kExitConfig = 2;
inline constexpr int kExitCheckpoint = 3;

/// Entry point shared by the binary and the tests. args excludes argv[0].
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace posenet
