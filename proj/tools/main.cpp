#include "cli.hpp"

int main(int argc, char** argv) { return guesslab::cli::run(argc, argv); }
