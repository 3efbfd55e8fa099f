#include <iostream>
#include <string>
#include <vector>

#include "eavit/cli/cli.h"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return eavit::cli::run(args, std::cout, std::cerr);
}
