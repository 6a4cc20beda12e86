#include "perceiver/cli/commands.hpp"

int main(int argc, char** argv) { return perceiver::cli::run_cli(argc, argv); }
