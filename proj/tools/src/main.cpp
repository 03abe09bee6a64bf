#include <iostream>
#include <string>
#include <vector>

#include "d3g_cli/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return d3g::cli::run(args, std::cout, std::cerr);
}
