#include <iostream>
#include <string>
#include <vector>

#include "nsergo/cli.hpp"

int main(int argc, char** argv) {
  return nsergo::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
