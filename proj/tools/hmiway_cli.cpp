#include "hmiway/cli.hpp"

int main(int argc, char** argv) { return hmiway::cli::run(argc, argv); }
