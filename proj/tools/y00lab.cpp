#include <iostream>
#include <string>
#include <vector>

#include "y00/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return y00::dispatch(std::move(args), std::cout, std::cerr);
}
