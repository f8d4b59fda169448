#pragma once

#include <string>
#include <vector>

namespace cg {

// Entry point behind the command-line tool; argv-style arguments without the
// program name. Exit codes: 0 success, 1 runtime failure, 2 usage error.
int cli_run(const std::vector<std::string>& args);

}  // namespace cg
