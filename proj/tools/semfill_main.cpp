#include "commands.hpp"

int main(int argc, char** argv) { return semfill::cli::run(argc, argv); }
