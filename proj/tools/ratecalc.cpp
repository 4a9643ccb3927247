#include <iostream>

#include "ratecalc/cli.hpp"

int main(int argc, char** argv) { return ratecalc::cli::run(argc, argv, std::cout, std::cerr); }
