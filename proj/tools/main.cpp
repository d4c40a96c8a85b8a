#include "cli/commands.hpp"

int main(int argc, char** argv) { return dsm::cli::cli_main(argc, argv); }
