#include "bandit_pca/cli.hpp"

int main(int argc, char** argv) { return bandit_pca::run_cli(argc, argv); }
