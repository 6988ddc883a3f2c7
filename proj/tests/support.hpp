#pragma once

// Shared fixtures and independent oracles for the test binaries. Oracles are
// deliberately naive: whole-dataset, in-memory, straight from the
// definitions.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <unistd.h>

#include "simcamp/trace_model.hpp"

namespace testing {

using simcamp::Label;
using simcamp::Trace;

// Fresh directory, removed with its contents on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("simcamp-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Six-trace worked example, H = 5.
inline constexpr std::size_t kExampleHorizon = 5;

inline std::vector<Trace> example_input() {
  return {{0, 0, 0, 0, 0}, {1, 0, 0, 1, 0}, {0, 0, 1, 2, 0}, {0, 0, 1, 0, 0},
          {0, 1, 0, 0, 1}, {1, 0, 0, 0, 0}, {1, 0, 0, 0, 0}};
}

inline std::vector<Trace> example_sorted() {
  return {{0, 0, 0, 0, 0}, {0, 0, 1, 0, 0}, {0, 0, 1, 2, 0},
          {0, 1, 0, 0, 1}, {1, 0, 0, 0, 0}, {1, 0, 0, 1, 0}};
}

inline const std::vector<Label> kExampleLoadLabels{0, 2, 8, 1, 0, 23};
inline const std::vector<Label> kExampleStoreLabels{1, 2, 8, 23};

inline const char* const kExampleCampaign =
    "L0 R1 S1 R1 S2 R3\n"
    "L2 I1 R1 S8 R2\n"
    "L8 I2 R2\n"
    "F2 F8 L1 I1 R3 I1 R1\n"
    "F1 L0 I1 R3 S23 R2\n"
    "L23 I1 R2\n"
    "F23\n";

inline std::vector<Trace> oracle_sort(std::vector<Trace> traces, bool unique) {
  std::sort(traces.begin(), traces.end());
  if (unique) traces.erase(std::unique(traces.begin(), traces.end()), traces.end());
  return traces;
}

// Load labels from the full label matrix: row i copies row i-1 up to the
// common prefix and takes fresh labels (i-1)H + j beyond it.
inline std::vector<Label> oracle_load_labels(const std::vector<Trace>& sorted, std::size_t h) {
  std::vector<std::vector<Label>> matrix(sorted.size(), std::vector<Label>(h + 1, 0));
  std::vector<Label> out;
  for (std::size_t i = 1; i <= sorted.size(); ++i) {
    std::size_t p = 0;
    if (i > 1) {
      while (p < h && sorted[i - 1][p] == sorted[i - 2][p]) ++p;
    }
    for (std::size_t j = 1; j <= h; ++j) {
      matrix[i - 1][j] = (i > 1 && j <= p) ? matrix[i - 2][j] : (i - 1) * h + j;
    }
    out.push_back(p == 0 ? 0 : matrix[i - 1][p]);
  }
  return out;
}

inline std::vector<Label> oracle_store_labels(const std::vector<Label>& loads) {
  std::set<Label> s(loads.begin(), loads.end());
  s.erase(0);
  return {s.begin(), s.end()};
}

// Distinct non-empty prefixes, by materialising each one.
inline std::uint64_t oracle_prefix_count(const std::vector<Trace>& traces) {
  std::set<std::vector<std::uint64_t>> prefixes;
  for (const auto& t : traces) {
    for (std::size_t k = 1; k <= t.size(); ++k) prefixes.emplace(t.begin(), t.begin() + k);
  }
  return prefixes.size();
}

inline std::vector<Trace> random_traces(std::mt19937_64& rng, std::size_t n, std::size_t h,
                                        std::uint64_t kinds) {
  std::uniform_int_distribution<std::uint64_t> code(0, kinds);
  std::vector<Trace> out(n, Trace(h));
  for (auto& t : out) {
    for (auto& d : t) d = code(rng);
  }
  return out;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace testing
