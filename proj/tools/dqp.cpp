#include <iostream>

#include "dqp/cli/app.hpp"

int main(int argc, char** argv) { return dqp::cli::run(argc, argv, std::cin, std::cout, std::cerr); }
