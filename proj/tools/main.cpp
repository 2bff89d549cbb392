#include <iostream>

#include "featspace/cli.hpp"

int main(int argc, char** argv) { return featspace::cli_dispatch(argc, argv, std::cout, std::cerr); }
