#include "sonic/cli/app.hpp"

int main(int argc, char** argv) { return sonic::cli::main(argc, argv); }
