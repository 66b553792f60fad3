#include <iostream>

#include "ttc/cli.hpp"

int main(int argc, char** argv) { return ttc::run_cli(argc, argv, std::cout, std::cerr); }
