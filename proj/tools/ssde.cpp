#include "ssde/cli.hpp"

int main(int argc, char** argv) { return ssde::cli::run_cli(argc, argv); }
