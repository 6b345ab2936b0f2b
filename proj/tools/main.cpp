#include <iostream>
#include <string>
#include <vector>

#include "hflow/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return hflow::run_cli(args, std::cout, std::cerr);
}
