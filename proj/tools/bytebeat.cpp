#include "bytebeat/cli.hpp"

int main(int argc, char** argv) { return bytebeat::cli_main(argc, argv); }
