// Copyright 2026 The PoseNet Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <string>
#include <vector>

#include "posenet/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return posenet::run_cli(args, std::cin, std::cout, std::cerr);
}
