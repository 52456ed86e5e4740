#include "idslab/cli.hpp"

int main(int argc, char** argv) { return idslab::cli::main_entry(argc, argv); }
