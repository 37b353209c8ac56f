#include <iostream>

#include "bfn/cli.hpp"

int main(int argc, char** argv) { return bfn::cli_main(argc, argv, std::cout, std::cerr); }
