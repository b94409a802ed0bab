#include "modescatter/cli.hpp"

int main(int argc, char** argv) { return modescatter::cli_main(argc, argv); }
