#include <iostream>

#include "retcl/cli/cli.hpp"

int main(int argc, char** argv) {
  return retcl::cli::run(argc, argv, std::cin, std::cout, std::cerr);
}
