// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include <sketchrnn/cli.hpp>

int main(int argc, char **argv) {
  return sketchrnn::cli_dispatch(argc, argv, std::cout, std::cerr);
}
