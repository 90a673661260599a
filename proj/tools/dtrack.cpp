#include "dtrack/cli.hpp"

int main(int argc, char** argv) { return dtrack::cli::run(argc, argv); }
