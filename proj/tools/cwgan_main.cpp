#include "cwgan/runtime/cli.hpp"

int main(int argc, char** argv) { return cwgan::runtime::run_cli(argc, argv); }
