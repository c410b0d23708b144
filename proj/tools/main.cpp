#include <iostream>

#include "scrapeflow/cli.hpp"

int main(int argc, char** argv) {
  return scrapeflow::run_cli(argc, argv, std::cout, std::cerr);
}
