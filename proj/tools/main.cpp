#include "dualref/cli.hpp"

int main(int argc, char** argv) { return dualref::cli::main(argc, argv); }
