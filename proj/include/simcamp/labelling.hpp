#pragma once

// Load labels (where each scenario resumes) and store labels (which states
// must be saved), computed from a lex-ordered unique dataset.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "simcamp/external_sort.hpp"
#include "simcamp/trace_model.hpp"

namespace simcamp {

/// Length of the longest common prefix of two distinct traces; always < H.
/// Throws IntegrityError if the traces are equal.
std::size_t lcp_len(std::span<const Disturbance> prev, std::span<const Disturbance> cur);

/// Streaming load labeller. Keeps only the previous trace and its label row.
class LoadLabeller {
 public:
  explicit LoadLabeller(std::size_t horizon, bool check_integrity = true);

  /// Label for the next trace of the dataset (trace index = number of pushes).
  /// Throws IntegrityError on unsorted or duplicate input.
  Label push(std::span<const Disturbance> trace);

  std::uint64_t count() const { return index_; }

 private:
  std::size_t horizon_;
  bool check_;
  std::uint64_t index_ = 0;
  Trace prev_;
  std::vector<Label> row_;
};

/// In-memory convenience over LoadLabeller.
std::vector<Label> load_labels(std::span<const Trace> sorted, std::size_t horizon);

/// dt-label: streams the sorted dataset and writes one u64 label per trace.
/// Returns the number of labels written.
std::uint64_t compute_load_labels(const std::filesystem::path& sorted_dataset, std::size_t horizon,
                                  std::size_t buffer_bytes, const std::filesystem::path& output,
                                  bool check_integrity = true);

/// Sort-unique of the load-label file (as an H = 1 dataset) with the
/// initial-state label 0 removed. Returns the number of store labels.
std::uint64_t compute_store_labels(const std::filesystem::path& load_labels_file,
                                   const SortBudget& budget, const std::filesystem::path& output);

}  // namespace simcamp
