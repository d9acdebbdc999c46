#include <iostream>

#include "xaitrust/cli.hpp"

int main(int argc, char** argv) {
  return xtrust::cli::run({argv + 1, argv + argc}, std::cout, std::cerr);
}
