#include "commands.hpp"

int main(int argc, char** argv) { return cst::cli::run(argc, argv); }
