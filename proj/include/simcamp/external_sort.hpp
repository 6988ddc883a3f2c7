#pragma once

// Out-of-core lexicographic sorting of DT files under a fixed RAM budget:
// sorted runs of at most one buffer each, then iterative 2-way merging.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "simcamp/trace_model.hpp"

namespace simcamp {

struct SortBudget {
  /// Bytes per buffer (B). Must hold at least two records.
  std::size_t buffer_bytes = 1 << 20;
  /// Directory for run files.
  std::filesystem::path temp_dir;
};

/// TMPDIR if set, otherwise the system temp directory.
std::filesystem::path default_temp_dir();

/// Throws FormatError if B < 2 records of the given horizon.
void check_budget(const SortBudget& budget, std::size_t horizon);

/// Splits input into chunks of floor(B / 8H) records, sorts each in memory
/// (dropping intra-chunk duplicates when unique) and writes each as a run
/// file in budget.temp_dir. Returns the run paths in input order.
std::vector<std::filesystem::path> sort_runs(const std::filesystem::path& input,
                                             std::size_t horizon, const SortBudget& budget,
                                             bool unique);

/// Streaming merge of two sorted files into output with one B-byte buffer per
/// input and one for output. Ties prefer run_a; with unique, equal records
/// are emitted once. Throws IntegrityError at the first inversion found in
/// either input. Returns the number of records written.
std::uint64_t merge_pair(const std::filesystem::path& run_a, const std::filesystem::path& run_b,
                         std::size_t horizon, const SortBudget& budget, bool unique,
                         const std::filesystem::path& output);

/// The dt-sort pipeline: sorted runs as in sort_runs, then left-to-right
/// pairwise merge passes until one run remains, which becomes output. Each
/// pass stores its runs back to back in one temp file, deleted once the next
/// pass is written.
void sort_file(const std::filesystem::path& input, std::size_t horizon, const SortBudget& budget,
               bool unique, const std::filesystem::path& output);

}  // namespace simcamp
