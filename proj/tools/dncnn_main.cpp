#include <iostream>
#include <string>
#include <vector>

#include "dncnn/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return dncnn::dispatch(args, std::cout, std::cerr);
}
