#include <iostream>

#include "nvspin/cli.hpp"

int main(int argc, char** argv) { return nvspin::cli::run(argc, argv, std::cout, std::cerr); }
