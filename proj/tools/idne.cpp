#include "idne/cli.hpp"

int main(int argc, char** argv) { return idne::cli::run(argc, argv); }
