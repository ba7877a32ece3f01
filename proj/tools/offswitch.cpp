#include "offswitch/cli.hpp"

int main(int argc, char** argv) { return offswitch::run_cli(argc, argv); }
