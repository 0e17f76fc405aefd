#include "kslyap/cli.hpp"

int main(int argc, char** argv) { return kslyap::cli::run(argc, argv); }
