#include "robust_enkf/cli.hpp"

int main(int argc, char** argv) { return robust_enkf::cli::run(argc, argv); }
