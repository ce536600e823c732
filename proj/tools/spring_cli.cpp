#include "spring/harness/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return spring::cli::cli_dispatch(argc, argv, std::cout, std::cerr); }
