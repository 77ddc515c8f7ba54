#include "qref/cli.hpp"

int main(int argc, char** argv) { return qref::run_cli(argc, argv); }
