#include "n1plus/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return n1plus::run_cli(argc, argv, std::cout, std::cerr);
}
