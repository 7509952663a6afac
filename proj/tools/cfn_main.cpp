#include "cfn/cli.hpp"

int main(int argc, char** argv) { return cfn::run_cli(argc, argv); }
