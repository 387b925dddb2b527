#include <iostream>
#include <string>
#include <vector>

#include "commands.hpp"

int main(int argc, char** argv) {
  sego::cli::tune_allocator();
  std::vector<std::string> args(argv + 1, argv + argc);
  return sego::cli::run_cli(args, std::cout, std::cerr);
}
