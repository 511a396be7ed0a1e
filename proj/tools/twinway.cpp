#include "twinway/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return twinway::cli_main(argc, argv, std::cout, std::cerr);
}
