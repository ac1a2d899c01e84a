#pragma once

#include <string>
#include <vector>

namespace gdn::cli {

// Entry point shared by the binary and the tests. `args` excludes the program
// name. Returns the process exit code: 0 ok, 2 usage, 3 data error, 4 numeric
// failure.
int run(const std::vector<std::string>& args);
int run(int argc, const char* const* argv);

}  // namespace gdn::cli
