#include "cli.hpp"

int main(int argc, char** argv) { return rotostate::cli::run(argc, argv); }
