#include "ucgm/cli.hpp"

int main(int argc, char** argv) { return ucgm::run_cli(argc, argv); }
