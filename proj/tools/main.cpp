#include "../src/cli/cli.hpp"

int main(int argc, char** argv) { return dvi::cli::run_cli(argc, argv); }
