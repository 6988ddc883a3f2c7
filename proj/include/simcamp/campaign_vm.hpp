#pragma once

// Symbolic simulator that replays a campaign and reconstructs the scenarios
// it simulates. Used to prove that a generated campaign reproduces its
// dataset with every prefix simulated once.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "simcamp/trace_model.hpp"

namespace simcamp {

enum class VmFault {
  UnknownLoad,
  UnknownFree,
  StoreCollision,
  DoubleInject,
  RunPastHorizon,
  NoActiveState,
  IncompleteScenario,
  LeakedLabels,
};

std::string_view fault_name(VmFault fault);

class VmError : public std::runtime_error {
 public:
  VmError(VmFault fault, std::size_t line, std::size_t command, const std::string& what);
  VmFault fault() const { return fault_; }
  std::size_t line() const { return line_; }
  std::size_t command() const { return command_; }

 private:
  VmFault fault_;
  std::size_t line_;
  std::size_t command_;
};

struct VmState {
  Trace prefix;  // position == prefix.size()
  std::optional<Disturbance> pending;
};

/// Executes commands one at a time. With a horizon, a scenario completes when
/// its position reaches H; without one, each line is one scenario and
/// completes at the end of the line.
class CampaignVm {
 public:
  using ScenarioSink = std::function<void(std::span<const Disturbance>)>;

  explicit CampaignVm(std::optional<std::size_t> horizon, ScenarioSink sink = {});

  void execute_line(std::span<const SimCommand> line);
  /// Checks that no scenario is mid-flight and no stored label is live.
  void finish();

  std::uint64_t sim_intervals() const { return sim_intervals_; }
  std::size_t live_states() const { return store_.size(); }
  std::size_t max_live_states() const { return max_live_; }
  std::uint64_t scenarios() const { return scenarios_; }

 private:
  void execute(const SimCommand& cmd);
  [[noreturn]] void fail(VmFault fault, const std::string& what) const;
  void complete();

  std::optional<std::size_t> horizon_;
  ScenarioSink sink_;
  std::unordered_map<Label, VmState> store_;
  std::optional<VmState> active_;
  bool active_ran_ = false;
  std::size_t line_no_ = 0;
  std::size_t cmd_no_ = 0;
  std::uint64_t sim_intervals_ = 0;
  std::size_t max_live_ = 0;
  std::uint64_t scenarios_ = 0;
};

struct ReplayResult {
  std::vector<Trace> scenarios;
  std::uint64_t sim_intervals = 0;
  std::size_t max_live_states = 0;
};

/// Throws VmError on the first semantic fault.
ReplayResult replay(const Campaign& campaign, std::optional<std::size_t> horizon);

/// Count of distinct non-empty prefixes, by building an explicit trie.
class PrefixTrie {
 public:
  void insert(std::span<const Disturbance> trace);
  std::uint64_t distinct_prefixes() const { return nodes_ - 1; }

 private:
  struct KeyHash {
    std::size_t operator()(const std::pair<std::uint64_t, Disturbance>& k) const {
      return std::hash<std::uint64_t>()(k.first * 0x9E3779B97F4A7C15ull ^ k.second);
    }
  };
  std::unordered_map<std::pair<std::uint64_t, Disturbance>, std::uint64_t, KeyHash> children_;
  std::uint64_t nodes_ = 1;
};

struct VerifyCheck {
  std::string name;
  bool passed = false;
  bool skipped = false;
  std::string detail;
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  std::uint64_t traces = 0;
  std::uint64_t sim_intervals = 0;
  std::size_t max_live_states = 0;

  bool ok() const;
  /// One "PASS|FAIL|SKIP <check>: <detail>" line per check.
  std::string text() const;
  /// Single machine-readable line.
  std::string summary() const;
};

struct VerifyOptions {
  /// Largest N*H for which the prefix-once trie check is run.
  std::uint64_t trie_limit = std::uint64_t{1} << 21;
  std::size_t buffer_bytes = 1 << 20;
};

/// Replays the campaign and compares against the lex-ordered dataset.
VerifyReport verify(std::span<const Trace> dataset, const Campaign& campaign, std::size_t horizon,
                    const VerifyOptions& options = {});

/// Streaming variant: the dataset is read from a DT file, the campaign from
/// a text stream; memory is bounded independently of N.
VerifyReport verify(const std::filesystem::path& dataset, std::istream& campaign,
                    std::size_t horizon, const VerifyOptions& options = {});

}  // namespace simcamp
