#pragma once

#include <string>
#include <vector>

namespace ppts {

// full command-line surface; returns the process exit code:
// 0 ok, 2 fit did not converge, 64 usage, 65 bad data or config, 66 missing file
int run_cli(std::vector<std::string> args);

}  // namespace ppts
