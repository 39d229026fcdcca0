#include <iostream>

#include "cloudatelier/cli.hpp"

int main(int argc, char** argv) { return cloudatelier::cli::run(argc, argv, std::cout, std::cerr); }
