#include "koop/cli.hpp"

int main(int argc, char** argv) { return koop::run_cli(argc, argv); }
