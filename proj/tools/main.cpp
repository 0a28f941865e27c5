#include "teamcredit/cli.hpp"

int main(int argc, char** argv) { return teamcredit::cli::run(argc, argv); }
