#include "vislog/cli.hpp"

int main(int argc, char** argv) { return vislog::cli::run(argc, argv); }
