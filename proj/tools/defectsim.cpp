#include "defectsim/cli.hpp"

int main(int argc, char** argv) { return defectsim::cli::run(argc, argv); }
