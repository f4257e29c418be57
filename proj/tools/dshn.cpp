#include "dshn/cli.hpp"

int main(int argc, char** argv) { return dshn::cli::main(argc, argv); }
