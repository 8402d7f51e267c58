#include "cli.hpp"

int main(int argc, char** argv) { return mfgtorus::cli::run(argc, argv); }
