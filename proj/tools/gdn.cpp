#include "gdn/cli.hpp"

int main(int argc, char** argv) { return gdn::cli::run(argc, argv); }
