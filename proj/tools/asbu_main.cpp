#include "asbu/cli.hpp"

int main(int argc, char** argv) { return asbu::run_cli(argc, argv); }
