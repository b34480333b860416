#include "cli.hpp"

int main(int argc, char** argv) { return hjlab::cli::run(argc, argv); }
