#include "cli.hpp"

int main(int argc, char** argv)
{
    return polyprop::cli::dispatch(argc, argv);
}
