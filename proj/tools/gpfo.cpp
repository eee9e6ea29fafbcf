#include "gpfo/cli.hpp"

int main(int argc, char** argv) { return gpfo::cli::dispatch(argc, argv); }
