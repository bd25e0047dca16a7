#include <iostream>

#include "tecod/cli.hpp"

int main(int argc, char** argv) { return tecod::cli::run(argc, argv, std::cout, std::cerr); }
