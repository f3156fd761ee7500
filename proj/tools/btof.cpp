#include "btof/cli.hpp"

int main(int argc, char** argv) { return btof::cli::run_cli(argc, argv); }
