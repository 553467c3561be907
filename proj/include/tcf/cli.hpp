#pragma once

#include <string>
#include <vector>

namespace tcf {

// Entry point behind the `tcf` binary; exposed for in-process testing.
// Exit codes: 0 success, 1 validation/config/usage error, 2 runtime failure.
int cli_run(const std::vector<std::string>& args);

}  // namespace tcf
