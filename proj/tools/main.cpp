#include "rulkit/commands.hpp"

int main(int argc, char** argv) { return rulkit::cli::run_cli(argc, argv); }
