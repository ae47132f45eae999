#include "vpi/cli.hpp"

int main(int argc, char** argv) { return vpi::cli_main(argc, argv); }
