#include "cli.hpp"

int main(int argc, char** argv) { return causalkit::cli::run(argc, argv); }
