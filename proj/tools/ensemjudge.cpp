#include <iostream>

#include "ensemjudge/cli.hpp"

int main(int argc, char** argv) { return ensemjudge::cli::run(argc, argv, std::cout, std::cerr); }
