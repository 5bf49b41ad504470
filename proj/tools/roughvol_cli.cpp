#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) { return roughvol::cli::dispatch(argc, argv, std::cout, std::cerr); }
