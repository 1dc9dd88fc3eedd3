#include "crstokes/cli.hpp"

int main(int argc, char** argv) { return crstokes::run_cli(argc, argv); }
