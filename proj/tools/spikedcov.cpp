#include <iostream>

#include "spikedcov/cli.hpp"

int main(int argc, char** argv) { return spikedcov::cli::dispatch(argc, argv, std::cout, std::cerr); }
