#include <iostream>

#include "zsiis/cli.hpp"

int main(int argc, char** argv) { return zsiis::run_cli(argc, argv, std::cout, std::cerr); }
