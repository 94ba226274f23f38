#include <iostream>

#include "bsim/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return bsim::run_cli(args, std::cout, std::cerr);
}
