#include "cli/run.hpp"

int main(int argc, char** argv) { return imia::cli::run_cli(argc, argv); }
