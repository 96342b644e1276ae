#include "gridflow/cli.hpp"

int main(int argc, char** argv) { return gridflow::cli_main(argc, argv); }
