#pragma once

#include <string>
#include <vector>

namespace crcseg::cli {

/// Runs one crcseg invocation (argv[0] is the program name). Returns the
/// process exit code: 0 success, 1 validation or feasibility failure,
/// 2 I/O or format failure.
int run(int argc, const char* const* argv);

int run(const std::vector<std::string>& args);

} // namespace crcseg::cli
