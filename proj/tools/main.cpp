#include <iostream>
#include <string>
#include <vector>

#include "sizebench/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return sizebench::cli::cli_dispatch(args, std::cout, std::cerr);
}
