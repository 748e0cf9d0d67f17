#include "sumvln/cli.hpp"

int main(int argc, char** argv) { return sumvln::run_cli(argc, argv); }
