#include "staplr/cli.hpp"

int main(int argc, char** argv) { return staplr::run_cli(argc, argv); }
