#include "hyperco/cli.hpp"

int main(int argc, char** argv) { return hyperco::cli::run_cli(argc, argv); }
