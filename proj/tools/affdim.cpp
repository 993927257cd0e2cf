#include <affdim/cli.hpp>

int main(int argc, char** argv)
{
    return affdim::cli::run(argc, argv);
}
