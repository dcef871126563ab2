#include "dmpc/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
  dmpc::configure_logging();
  return dmpc::cli_main(argc, argv, std::cout, std::cerr);
}
