#include <iostream>

#include "uncproxy/pipeline.hpp"

int main(int argc, char** argv) { return uncproxy::run_cli(argc, argv, std::cout, std::cerr); }
