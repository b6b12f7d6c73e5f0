#include "icpkit/cli.hpp"

int main(int argc, char** argv) { return icpkit::cli::main(argc, argv); }
