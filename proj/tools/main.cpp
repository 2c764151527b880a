#include <iostream>

#include "egur/cli.hpp"

int main(int argc, char** argv) { return egur::cli::run(argc, argv, std::cout, std::cerr); }
