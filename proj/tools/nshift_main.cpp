#include "nshift/cli/commands.hpp"

int main(int argc, char** argv) { return nshift::cli::run_cli(argc, argv); }
