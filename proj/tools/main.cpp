#include "spherecl/cli.hpp"

int main(int argc, char** argv) { return spherecl::cli::run_main(argc, argv); }
