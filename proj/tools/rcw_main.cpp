#include <iostream>

#include "rcw/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return rcw::run_cli(args, std::cout, std::cerr);
}
