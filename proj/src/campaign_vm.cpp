#include "simcamp/campaign_vm.hpp"

#include <algorithm>
#include <istream>
#include <sstream>

namespace simcamp {

std::string_view fault_name(VmFault fault) {
  switch (fault) {
    case VmFault::UnknownLoad: return "unknown-load";
    case VmFault::UnknownFree: return "unknown-free";
    case VmFault::StoreCollision: return "store-collision";
    case VmFault::DoubleInject: return "double-inject";
    case VmFault::RunPastHorizon: return "run-past-horizon";
    case VmFault::NoActiveState: return "no-active-state";
    case VmFault::IncompleteScenario: return "incomplete-scenario";
    case VmFault::LeakedLabels: return "leaked-labels";
  }
  return "?";
}

VmError::VmError(VmFault fault, std::size_t line, std::size_t command, const std::string& what)
    : std::runtime_error(std::string(fault_name(fault)) + " at line " + std::to_string(line) +
                         ", command " + std::to_string(command) + ": " + what),
      fault_(fault),
      line_(line),
      command_(command) {}

CampaignVm::CampaignVm(std::optional<std::size_t> horizon, ScenarioSink sink)
    : horizon_(horizon), sink_(std::move(sink)) {
  if (horizon_) check_horizon(*horizon_);
}

void CampaignVm::fail(VmFault fault, const std::string& what) const {
  throw VmError(fault, line_no_, cmd_no_, what);
}

void CampaignVm::complete() {
  ++scenarios_;
  if (sink_) sink_(active_->prefix);
  active_.reset();
  active_ran_ = false;
}

void CampaignVm::execute(const SimCommand& cmd) {
  const std::string arg = std::to_string(cmd.arg);
  switch (cmd.kind) {
    case CommandKind::Load: {
      if (active_) fail(VmFault::IncompleteScenario, "L" + arg + " while a scenario is still running");
      if (cmd.arg == 0) {
        active_.emplace();
      } else {
        auto it = store_.find(cmd.arg);
        if (it == store_.end()) fail(VmFault::UnknownLoad, "label " + arg + " is not stored");
        active_ = it->second;
      }
      active_ran_ = false;
      if (horizon_ && active_->prefix.size() >= *horizon_) {
        fail(VmFault::RunPastHorizon, "loaded state " + arg + " is already at the horizon");
      }
      break;
    }
    case CommandKind::Free: {
      if (cmd.arg == 0 || store_.erase(cmd.arg) == 0) {
        fail(VmFault::UnknownFree, "label " + arg + " is not stored");
      }
      break;
    }
    case CommandKind::Inject: {
      if (!active_) fail(VmFault::NoActiveState, "I" + arg + " without a loaded state");
      if (active_->pending) fail(VmFault::DoubleInject, "I" + arg + " while another injection is pending");
      active_->pending = cmd.arg;
      break;
    }
    case CommandKind::Run: {
      if (!active_) fail(VmFault::NoActiveState, "R" + arg + " without a loaded state");
      const std::uint64_t pos = active_->prefix.size();
      if (horizon_ && (cmd.arg > *horizon_ || pos + cmd.arg > *horizon_)) {
        fail(VmFault::RunPastHorizon, "R" + arg + " from position " + std::to_string(pos) +
                                          " passes H=" + std::to_string(*horizon_));
      }
      active_->prefix.push_back(active_->pending.value_or(0));
      active_->prefix.resize(pos + cmd.arg, 0);
      active_->pending.reset();
      sim_intervals_ += cmd.arg;
      active_ran_ = true;
      if (horizon_ && active_->prefix.size() == *horizon_) complete();
      break;
    }
    case CommandKind::Store: {
      if (!active_) fail(VmFault::NoActiveState, "S" + arg + " without an active state");
      if (cmd.arg == 0) fail(VmFault::StoreCollision, "label 0 is the initial state");
      auto [it, inserted] = store_.try_emplace(cmd.arg, *active_);
      if (!inserted) fail(VmFault::StoreCollision, "label " + arg + " is already stored");
      max_live_ = std::max(max_live_, store_.size());
      break;
    }
  }
}

void CampaignVm::execute_line(std::span<const SimCommand> line) {
  ++line_no_;
  cmd_no_ = 0;
  for (const auto& cmd : line) {
    ++cmd_no_;
    execute(cmd);
  }
  if (!horizon_ && active_) {
    if (!active_ran_) fail(VmFault::IncompleteScenario, "line ends without a run");
    complete();
  }
}

void CampaignVm::finish() {
  if (active_) {
    fail(VmFault::IncompleteScenario, "campaign ends at position " +
                                          std::to_string(active_->prefix.size()) + " of a scenario");
  }
  if (!store_.empty()) {
    std::vector<Label> live;
    for (const auto& [label, state] : store_) live.push_back(label);
    std::sort(live.begin(), live.end());
    std::string list;
    for (std::size_t k = 0; k < live.size() && k < 8; ++k) list += (k ? " " : "") + std::to_string(live[k]);
    if (live.size() > 8) list += " ...";
    fail(VmFault::LeakedLabels, std::to_string(live.size()) + " stored labels never freed: " + list);
  }
}

ReplayResult replay(const Campaign& campaign, std::optional<std::size_t> horizon) {
  ReplayResult result;
  CampaignVm vm(horizon, [&](std::span<const Disturbance> t) { result.scenarios.emplace_back(t.begin(), t.end()); });
  for (const auto& line : campaign.lines) vm.execute_line(line);
  vm.finish();
  result.sim_intervals = vm.sim_intervals();
  result.max_live_states = vm.max_live_states();
  return result;
}

void PrefixTrie::insert(std::span<const Disturbance> trace) {
  std::uint64_t node = 0;
  for (Disturbance d : trace) {
    auto [it, inserted] = children_.try_emplace({node, d}, nodes_);
    if (inserted) ++nodes_;
    node = it->second;
  }
}

// ---------------------------------------------------------------------------

bool VerifyReport::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const VerifyCheck& c) { return c.passed || c.skipped; });
}

std::string VerifyReport::text() const {
  std::ostringstream out;
  for (const auto& c : checks) {
    out << (c.skipped ? "SKIP " : c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
  }
  return out.str();
}

std::string VerifyReport::summary() const {
  std::ostringstream out;
  out << "verify ok=" << (ok() ? 1 : 0) << " traces=" << traces << " sim_c=" << sim_intervals
      << " max_live=" << max_live_states;
  for (const auto& c : checks) out << ' ' << c.name << '=' << (c.skipped ? "skip" : c.passed ? "pass" : "fail");
  return out.str();
}

namespace {

using ExpectedSource = std::function<std::optional<std::span<const Disturbance>>()>;
using LineSource = std::function<std::optional<CommandLine>()>;

VerifyReport run_verify(const ExpectedSource& expected, std::uint64_t dataset_size,
                        const LineSource& lines, std::size_t horizon, const VerifyOptions& options) {
  VerifyReport report;
  const bool use_trie = dataset_size <= options.trie_limit / horizon;
  PrefixTrie trie;

  std::uint64_t matched = 0;
  std::optional<std::string> divergence;
  bool dataset_exhausted = false;

  auto on_scenario = [&](std::span<const Disturbance> got) {
    ++report.traces;
    if (divergence) return;
    auto want = dataset_exhausted ? std::nullopt : expected();
    if (!want) {
      dataset_exhausted = true;
      divergence = "campaign emits extra scenario " + std::to_string(report.traces) + " beyond the dataset";
      return;
    }
    if (use_trie) trie.insert(*want);
    for (std::size_t j = 0; j < horizon; ++j) {
      const Disturbance g = j < got.size() ? got[j] : 0;
      if (got.size() != horizon || g != (*want)[j]) {
        divergence = "first divergence at trace " + std::to_string(report.traces) + ", interval " +
                     std::to_string(j + 1) + ": expected " + std::to_string((*want)[j]) + ", got " +
                     (j < got.size() ? std::to_string(g) : std::string("<end>"));
        return;
      }
    }
    ++matched;
  };

  CampaignVm vm(horizon, on_scenario);
  VerifyCheck replay_check{"replay", true, false, ""};
  VerifyCheck store_check{"state-store-empty", true, false, "no live labels at end"};
  try {
    while (auto line = lines()) vm.execute_line(*line);
    try {
      vm.finish();
    } catch (const VmError& e) {
      if (e.fault() != VmFault::LeakedLabels) throw;
      store_check.passed = false;
      store_check.detail = e.what();
    }
    replay_check.detail = "replayed " + std::to_string(report.traces) + " scenarios";
  } catch (const VmError& e) {
    replay_check.passed = false;
    replay_check.detail = e.what();
    store_check.skipped = true;
    store_check.detail = "replay aborted";
  } catch (const ParseError& e) {
    replay_check.passed = false;
    replay_check.detail = std::string("parse error: ") + e.what();
    store_check.skipped = true;
    store_check.detail = "replay aborted";
  }
  report.sim_intervals = vm.sim_intervals();
  report.max_live_states = vm.max_live_states();

  if (!divergence && !dataset_exhausted) {
    if (auto extra = expected()) {
      if (use_trie) trie.insert(*extra);
      std::uint64_t missing = 1;
      while (auto more = expected()) {
        if (use_trie) trie.insert(*more);
        ++missing;
      }
      divergence = "campaign emits " + std::to_string(report.traces) + " scenarios, dataset has " +
                   std::to_string(report.traces + missing);
    }
  }
  VerifyCheck equality{"trace-equality", !divergence, false,
                       divergence ? *divergence : std::to_string(matched) + " traces match in order"};

  VerifyCheck prefix{"prefix-once", false, false, ""};
  if (!use_trie) {
    prefix.skipped = true;
    prefix.detail = "dataset larger than the trie limit";
  } else if (divergence || !replay_check.passed) {
    prefix.skipped = true;
    prefix.detail = "requires a complete matching replay";
  } else {
    prefix.passed = trie.distinct_prefixes() == report.sim_intervals;
    prefix.detail = "SIM(C)=" + std::to_string(report.sim_intervals) +
                    ", distinct prefixes=" + std::to_string(trie.distinct_prefixes());
  }

  report.checks = {replay_check, equality, prefix, store_check};
  return report;
}

}  // namespace

VerifyReport verify(std::span<const Trace> dataset, const Campaign& campaign, std::size_t horizon,
                    const VerifyOptions& options) {
  check_horizon(horizon);
  std::size_t next_trace = 0, next_line = 0;
  ExpectedSource expected = [&]() -> std::optional<std::span<const Disturbance>> {
    if (next_trace == dataset.size()) return std::nullopt;
    return std::span<const Disturbance>(dataset[next_trace++]);
  };
  LineSource lines = [&]() -> std::optional<CommandLine> {
    if (next_line == campaign.lines.size()) return std::nullopt;
    return campaign.lines[next_line++];
  };
  return run_verify(expected, dataset.size(), lines, horizon, options);
}

VerifyReport verify(const std::filesystem::path& dataset, std::istream& campaign, std::size_t horizon,
                    const VerifyOptions& options) {
  check_horizon(horizon);
  TraceReader reader(dataset, horizon, options.buffer_bytes);
  CampaignReader lines_in(campaign, horizon);
  ExpectedSource expected = [&]() { return reader.next(); };
  LineSource lines = [&]() { return lines_in.next(); };
  return run_verify(expected, reader.record_count(), lines, horizon, options);
}

}  // namespace simcamp
