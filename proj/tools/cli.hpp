#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mvp::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kNumericalAbort = 2, kGradCheckFailed = 3 };

/// Runs one `mvp` command. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// FNV-1a digest (16 hex digits) of the canonical form of a JSON document.
/// Object keys are sorted, so field order does not matter.
std::string config_digest(const std::string& json_text);

}  // namespace mvp::cli
