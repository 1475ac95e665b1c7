#include "prvkit/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return prvkit::cli::run(argc, argv, std::cout, std::cerr);
}
