#include "nthdyn/cli.hpp"

int main(int argc, char** argv) { return nthdyn::cli::run(argc, argv); }
