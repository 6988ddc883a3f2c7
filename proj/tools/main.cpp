#include <algorithm>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "cli.hpp"

namespace {

int usage(std::ostream& os, int code) {
  os << "usage: simcamp <tool> [args...]\n\ntools:\n";
  for (const auto& name : simcamp::cli::tool_names()) os << "  " << name << "\n";
  os << "\nRun 'simcamp <tool> --help' for the arguments of one tool.\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  std::ios::sync_with_stdio(false);
#ifdef SIMCAMP_TOOL
  std::string tool = SIMCAMP_TOOL;
  int first = 1;
#else
  std::string tool = argc > 0 ? std::filesystem::path(argv[0]).filename().string() : "";
  int first = 1;
  const auto& names = simcamp::cli::tool_names();
  if (std::find(names.begin(), names.end(), tool) == names.end()) {
    if (argc < 2) return usage(std::cerr, simcamp::cli::kExitUsage);
    tool = argv[1];
    if (tool == "--help" || tool == "-h") return usage(std::cout, simcamp::cli::kExitOk);
    first = 2;
  }
#endif
  std::vector<std::string> args(argv + first, argv + argc);
  const int rc = simcamp::cli::run_tool(tool, args, std::cin, std::cout, std::cerr);
  std::cout.flush();
  return rc;
}
