#pragma once

// Entry points for the simcamp command-line tools. Every tool is reachable
// through run_tool so tests can drive it in-process with string streams.

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace simcamp::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitData = 1;
inline constexpr int kExitUsage = 2;

/// Names of all tools, in help order.
const std::vector<std::string>& tool_names();

/// Runs one tool. args excludes the tool name. Returns the exit code.
int run_tool(std::string_view name, const std::vector<std::string>& args, std::istream& in,
             std::ostream& out, std::ostream& err);

}  // namespace simcamp::cli
