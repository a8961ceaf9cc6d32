#include "cli.hpp"

int main(int argc, char** argv) { return affinelab::cli::run(argc, argv); }
