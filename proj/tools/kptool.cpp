#include "krasovskii/cli.hpp"

int main(int argc, char** argv) { return krasovskii::cli::run(argc, argv); }
