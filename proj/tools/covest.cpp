#include "covest/bench/cli.hpp"

int main(int argc, char** argv) { return covest::bench::run_cli(argc, argv); }
