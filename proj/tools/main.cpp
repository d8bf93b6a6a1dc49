#include "semplan/cli.hpp"

int main(int argc, char** argv) { return semplan::run_cli(argc, argv); }
