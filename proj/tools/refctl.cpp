#include <iostream>

#include "refctl/cli.hpp"

int main(int argc, char** argv) { return refctl::cli::run(argc, argv, std::cout, std::cerr); }
