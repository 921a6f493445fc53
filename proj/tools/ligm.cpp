#include "ligm/cli.hpp"

int main(int argc, char** argv) { return ligm::cli_main(argc, argv); }
