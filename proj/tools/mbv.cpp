#include <iostream>

#include "mbv/cli.hpp"

int main(int argc, char** argv) { return mbv::run(argc, argv, std::cout, std::cerr); }
