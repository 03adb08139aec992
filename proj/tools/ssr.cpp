#include <iostream>

#include "ssr/cli.hpp"

int main(int argc, char** argv) {
  return ssr::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
