#include <iostream>
#include <string>
#include <vector>

#include "fedplane/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return fedplane::run_cli(args, std::cout, std::cerr);
}
