#include <iostream>

#include "idealflow/cli.hpp"

int main(int argc, char** argv) { return idealflow::run_cli(argc, argv, std::cout, std::cerr); }
