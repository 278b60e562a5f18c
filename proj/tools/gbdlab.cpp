#include "gbdlab/cli.hpp"

int main(int argc, char** argv) { return gbd::cli::main(argc, argv); }
