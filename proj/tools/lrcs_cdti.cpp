#include "lrcs/cli.hpp"

int main(int argc, char** argv) { return lrcs::cli::main(argc, argv); }
