#include "sigfd/cli.hpp"

int main(int argc, char** argv) { return sigfd::cli::run_cli(argc, argv); }
