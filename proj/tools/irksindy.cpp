#include <iostream>

#include "irksindy/cli.hpp"

int main(int argc, char** argv) { return irksindy::cli::run(argc, argv, std::cout, std::cerr); }
