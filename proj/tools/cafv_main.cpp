#include "cafv/cli.hpp"

int main(int argc, char** argv) { return cafv::cli::run(argc, argv); }
