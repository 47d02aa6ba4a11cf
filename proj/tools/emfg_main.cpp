#include "emfg/cli.hpp"

int main(int argc, char** argv) { return emfg::run_cli(argc, argv); }
