#include <iostream>

#include "pollmgraph/cli.hpp"

int main(int argc, char** argv) {
  return pollmgraph::cli::dispatch(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
