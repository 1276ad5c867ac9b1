#include <string>
#include <vector>

#include "glucolens/cli.hpp"

int main(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    return glucolens::cli::run(args);
}
