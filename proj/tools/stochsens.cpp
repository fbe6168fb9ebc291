// Command-line entry point; see include/stochsens/cli.hpp.

#include "stochsens/cli.hpp"

int main(int argc, char** argv) { return stochsens::cli::run_cli(argc, argv); }
