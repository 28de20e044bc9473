#include "sticker/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return sticker::cli::run(argc, argv, std::cout, std::cerr); }
