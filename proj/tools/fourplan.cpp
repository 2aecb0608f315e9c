#include "fourplan/cli.hpp"

int main(int argc, char** argv) { return fourplan::run_command(argc, argv); }
