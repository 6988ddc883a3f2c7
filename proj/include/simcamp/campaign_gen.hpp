#pragma once

// Emits the optimised simulation campaign from the sorted dataset D, its load
// labels L and its store labels S, streaming all three. Every distinct
// scenario prefix is simulated exactly once.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "simcamp/trace_model.hpp"

namespace simcamp {

struct CampaignStats {
  std::uint64_t traces = 0;   // N
  std::uint64_t horizon = 0;  // H
  std::uint64_t sim_intervals = 0;  // SIM(C), sum of Run arguments
  std::uint64_t loads = 0;
  std::uint64_t stores = 0;
  std::uint64_t frees = 0;
  std::uint64_t injects = 0;
  std::uint64_t lines = 0;
};

/// Line-at-a-time generator. Feed traces with their load labels in dataset
/// order; store labels are pulled from the supplied source as needed.
class CampaignGenerator {
 public:
  /// Returns the next pending store label, or nullopt when S is exhausted.
  using StoreSource = std::function<std::optional<Label>()>;

  CampaignGenerator(std::size_t horizon, StoreSource store_labels, bool check_integrity = true);

  /// Commands for the next trace.
  const CommandLine& next_line(std::span<const Disturbance> trace, Label load_label);

  /// Cleanup line freeing every remaining slot, ascending height. Empty if
  /// nothing is left. Also verifies that S was fully consumed.
  const CommandLine& finish();

  const CampaignStats& stats() const { return stats_; }

 private:
  std::optional<Label> pending_store();
  void consume_store();

  std::size_t horizon_;
  StoreSource source_;
  bool check_;
  std::uint64_t index_ = 0;
  std::vector<Label> free_slots_;   // F_0..F_{H-1}
  std::vector<Label> live_stored_;  // label stored at height h, not yet freed
  std::vector<Label> prev_row_;     // label row of the previous trace
  Trace prev_;
  std::optional<Label> pending_;
  bool pending_loaded_ = false;
  CommandLine line_;
  CampaignStats stats_;
};

/// In-memory form: one line per trace plus the optional cleanup line.
Campaign generate_campaign(std::span<const Trace> sorted, std::span<const Label> load_labels,
                           std::span<const Label> store_labels, std::size_t horizon);

/// dt-optimise: streams the three files and writes campaign text to out
/// through a buffer of buffer_bytes. A leading 0 in the store-label file (as
/// produced by sorting the load labels directly) is skipped.
CampaignStats generate_campaign(const std::filesystem::path& sorted_dataset,
                                const std::filesystem::path& load_labels,
                                const std::filesystem::path& store_labels, std::size_t horizon,
                                std::size_t buffer_bytes, std::ostream& out,
                                bool check_integrity = true);

struct CompressionStats {
  std::uint64_t sim_d = 0;  // N * H
  std::uint64_t sim_c = 0;  // sum of Run arguments
  double ratio() const { return sim_c == 0 ? 0.0 : static_cast<double>(sim_d) / static_cast<double>(sim_c); }
  /// Ratio rounded to two decimals, e.g. "1.43".
  std::string ratio_text() const;
};

CompressionStats campaign_stats(std::uint64_t traces, std::size_t horizon, const Campaign& campaign);
/// Streaming variant over campaign text.
CompressionStats campaign_stats(std::uint64_t traces, std::size_t horizon, std::istream& campaign);

}  // namespace simcamp
