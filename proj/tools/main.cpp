#include "enetpath/cli.hpp"

int main(int argc, char** argv) { return enetpath::cli::run_cli(argc, argv); }
