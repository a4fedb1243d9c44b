#include <string>
#include <vector>

#include "ppts/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return ppts::run_cli(std::move(args));
}
