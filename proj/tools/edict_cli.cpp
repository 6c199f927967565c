#include <iostream>

#include "edict/cli.hpp"

int main(int argc, char** argv) { return edict::cli::main_entry(argc, argv, std::cout, std::cerr); }
