#include "commands.hpp"

int main(int argc, char** argv) { return pidon::cli::run(argc, argv); }
