#include <iostream>

#include "rgbsde/cli.hpp"

int main(int argc, char** argv) { return rgbsde::run_cli(argc, argv, std::cout, std::cerr); }
