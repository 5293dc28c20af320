#include "cli.hpp"

int main(int argc, char** argv) { return fglr::cli::main(argc, argv); }
