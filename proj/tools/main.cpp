#include <iostream>
#include <string>
#include <vector>

#include "scenefuse/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return scenefuse::run_cli(args, std::cout, std::cerr);
}
