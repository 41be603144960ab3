#include "cfimend/pipeline.hpp"

#include <iostream>

int main(int argc, char **argv) {
  return cfimend::cliMain(argc, argv, std::cout, std::cerr);
}
