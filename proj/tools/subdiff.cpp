#include "subdiff/cli.hpp"

int main(int argc, char** argv) { return subdiff::cli::run_cli(argc, argv); }
