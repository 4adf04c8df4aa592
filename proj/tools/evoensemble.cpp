#include "evo/runner.hpp"

int main(int argc, char** argv) { return evo::cli_main(argc, argv); }
