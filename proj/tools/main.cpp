#include "cli.hpp"

int main(int argc, char** argv) { return metriplectic::cli::run(argc, argv); }
