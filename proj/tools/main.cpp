#include "lpc/cli.hpp"

int main(int argc, char** argv) { return lpc::cli_main(argc, argv); }
