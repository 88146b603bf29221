#include <iostream>

#include "qopf/cli.hpp"

int main(int argc, char** argv) { return qopf::run_cli(argc, argv, std::cout, std::cerr); }
