#include "vcgan/cli.hpp"

int main(int argc, char** argv) { return vcgan::run_cli(argc, argv); }
