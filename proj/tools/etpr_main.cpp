#include "etpr/cli.hpp"

int main(int argc, char** argv) { return etpr::cli::run(argc, argv); }
