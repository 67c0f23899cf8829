#include <iostream>
#include <string>
#include <vector>

#include "crskit/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return crskit::run_cli(args, std::cout, std::cerr);
}
