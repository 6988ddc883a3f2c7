#include "simcamp/labelling.hpp"

#include <algorithm>

namespace simcamp {

namespace fs = std::filesystem;

std::size_t lcp_len(std::span<const Disturbance> prev, std::span<const Disturbance> cur) {
  const std::size_t n = std::min(prev.size(), cur.size());
  std::size_t p = 0;
  while (p < n && prev[p] == cur[p]) ++p;
  if (p == n && prev.size() == cur.size()) {
    throw IntegrityError("duplicate trace: dataset is not unique");
  }
  return p;
}

LoadLabeller::LoadLabeller(std::size_t horizon, bool check_integrity)
    : horizon_(horizon), check_(check_integrity), row_(horizon) {
  check_horizon(horizon);
}

Label LoadLabeller::push(std::span<const Disturbance> trace) {
  if (trace.size() != horizon_) throw FormatError("trace length differs from H");
  ++index_;
  if (index_ == 1) {
    for (std::size_t j = 1; j <= horizon_; ++j) row_[j - 1] = j;
    prev_.assign(trace.begin(), trace.end());
    return 0;
  }
  std::size_t p = 0;
  try {
    p = lcp_len(prev_, trace);
  } catch (const IntegrityError&) {
    throw IntegrityError("duplicate trace at index " + std::to_string(index_) +
                         ": dataset is not unique");
  }
  if (check_ && trace[p] < prev_[p]) {
    throw IntegrityError("trace " + std::to_string(index_) +
                         " is smaller than its predecessor: dataset is not sorted");
  }
  const Label load = p > 0 ? row_[p - 1] : 0;
  for (std::size_t j = p + 1; j <= horizon_; ++j) row_[j - 1] = encode_label(index_, j, horizon_);
  std::copy(trace.begin() + p, trace.end(), prev_.begin() + p);
  return load;
}

std::vector<Label> load_labels(std::span<const Trace> sorted, std::size_t horizon) {
  LoadLabeller labeller(horizon);
  std::vector<Label> out;
  out.reserve(sorted.size());
  for (const auto& t : sorted) out.push_back(labeller.push(t));
  return out;
}

std::uint64_t compute_load_labels(const fs::path& sorted_dataset, std::size_t horizon,
                                  std::size_t buffer_bytes, const fs::path& output,
                                  bool check_integrity) {
  check_horizon(horizon);
  TraceReader in(sorted_dataset, horizon, buffer_bytes);
  TraceWriter out(output, 1, buffer_bytes);
  LoadLabeller labeller(horizon, check_integrity);
  while (auto rec = in.next()) {
    const Label l = labeller.push(*rec);
    out.write(std::span<const Label>(&l, 1));
  }
  out.close();
  return labeller.count();
}

std::uint64_t compute_store_labels(const fs::path& load_labels_file, const SortBudget& budget,
                                   const fs::path& output) {
  fs::path dir = budget.temp_dir.empty() ? default_temp_dir() : budget.temp_dir;
  const fs::path sorted = dir / (output.filename().string() + ".sorted.tmp");
  sort_file(load_labels_file, 1, budget, true, sorted);
  std::uint64_t count = 0;
  {
    TraceReader in(sorted, 1, budget.buffer_bytes);
    TraceWriter out(output, 1, budget.buffer_bytes);
    while (auto rec = in.next()) {
      if ((*rec)[0] == 0) continue;
      out.write(*rec);
      ++count;
    }
    out.close();
  }
  fs::remove(sorted);
  return count;
}

}  // namespace simcamp
