#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace modegan::cli {

enum ExitCode : int { kOk = 0, kUserError = 1, kIoError = 2, kNumericAbort = 3 };

/// Entry point of the `modegan` tool. Normal output goes to `out`,
/// diagnostics and error messages to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace modegan::cli
