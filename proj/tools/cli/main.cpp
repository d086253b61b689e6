#include "run.hpp"

int main(int argc, char** argv) { return pdp::cli::run_cli(argc, argv); }
