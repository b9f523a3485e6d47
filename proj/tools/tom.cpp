#include <iostream>
#include <string>
#include <vector>

#include "tom/api.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return tom::cli_dispatch(args, std::cout, std::cerr);
}
