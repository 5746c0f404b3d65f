#include "morsenet/cli.hpp"

int main(int argc, char** argv) { return morsenet::cli::run(argc, argv); }
