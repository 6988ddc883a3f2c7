#include "simcamp/campaign_gen.hpp"

#include <cstdio>
#include <istream>
#include <ostream>

#include "simcamp/labelling.hpp"

namespace simcamp {

namespace fs = std::filesystem;

CampaignGenerator::CampaignGenerator(std::size_t horizon, StoreSource store_labels,
                                     bool check_integrity)
    : horizon_(horizon),
      source_(std::move(store_labels)),
      check_(check_integrity),
      free_slots_(horizon, 0),
      live_stored_(horizon + 1, 0),
      prev_row_(horizon, 0),
      prev_(horizon, 0) {
  check_horizon(horizon);
  stats_.horizon = horizon;
}

std::optional<Label> CampaignGenerator::pending_store() {
  while (!pending_loaded_) {
    pending_ = source_ ? source_() : std::nullopt;
    // Label 0 is the initial state and is never stored.
    pending_loaded_ = !(pending_ && *pending_ == 0);
  }
  return pending_;
}

void CampaignGenerator::consume_store() { pending_loaded_ = false; }

const CommandLine& CampaignGenerator::next_line(std::span<const Disturbance> trace, Label load) {
  if (trace.size() != horizon_) throw FormatError("trace length differs from H");
  const std::uint64_t i = ++index_;
  const std::string where = "trace " + std::to_string(i);
  auto fail = [&](const std::string& what) { throw IntegrityError(where + ": " + what); };

  std::size_t p = 0;
  if (load != 0) {
    p = static_cast<std::size_t>(load % horizon_);
    if (p == 0) fail("load label " + std::to_string(load) + " has full height H");
    if (label_owner(load, horizon_) >= i) fail("load label " + std::to_string(load) + " is not from an earlier trace");
  }

  if (check_) {
    if (i == 1) {
      if (load != 0) fail("first load label must be 0");
    } else {
      std::size_t lcp = 0;
      try {
        lcp = lcp_len(prev_, trace);
      } catch (const IntegrityError&) {
        fail("duplicate of the previous trace");
      }
      if (trace[lcp] < prev_[lcp]) fail("dataset is not lex-ordered");
      if (lcp != p) {
        fail("load label " + std::to_string(load) + " implies prefix length " + std::to_string(p) +
             " but the common prefix with the previous trace has length " + std::to_string(lcp));
      }
      if (p > 0 && prev_row_[p - 1] != load) {
        fail("load label " + std::to_string(load) + " does not name the shared prefix state " +
             std::to_string(prev_row_[p - 1]));
      }
    }
  }

  line_.clear();

  // Frees for heights above the resume point.
  for (std::size_t j = p + 1; j < horizon_; ++j) {
    if (free_slots_[j] > 0) {
      line_.push_back(SimCommand::free(free_slots_[j]));
      if (live_stored_[j] == free_slots_[j]) live_stored_[j] = 0;
      free_slots_[j] = 0;
      ++stats_.frees;
    }
  }

  if (free_slots_[p] != 0 && free_slots_[p] != load) {
    fail("free slot " + std::to_string(p) + " holds " + std::to_string(free_slots_[p]) +
         " while loading " + std::to_string(load));
  }
  if (load != 0 && live_stored_[p] != load) {
    fail("load of label " + std::to_string(load) + " which was never stored");
  }
  line_.push_back(SimCommand::load(load));
  free_slots_[p] = load;
  ++stats_.loads;

  // Inject/run/store groups over intervals p+1..H.
  std::size_t start = p + 1;
  for (std::size_t idx = p + 2; idx <= horizon_ + 1; ++idx) {
    const Label reached = encode_label(i, idx - 1, horizon_);
    bool store = false;
    if (auto pending = pending_store()) {
      if (*pending < reached) {
        fail("store label " + std::to_string(*pending) + " out of order or never reached");
      }
      store = *pending == reached;
    }
    if (idx <= horizon_ && trace[idx - 1] == 0 && !store) continue;

    if (trace[start - 1] != 0) {
      line_.push_back(SimCommand::inject(trace[start - 1]));
      ++stats_.injects;
    }
    line_.push_back(SimCommand::run(idx - start));
    stats_.sim_intervals += idx - start;
    if (store) {
      const std::size_t h = idx - 1;
      if (h == horizon_) fail("store label " + std::to_string(reached) + " has full height H");
      if (live_stored_[h] != 0) {
        fail("storing " + std::to_string(reached) + " would leak live label " +
             std::to_string(live_stored_[h]));
      }
      line_.push_back(SimCommand::store(reached));
      live_stored_[h] = reached;
      consume_store();
      ++stats_.stores;
    }
    start = idx;
  }

  for (std::size_t j = p + 1; j <= horizon_; ++j) prev_row_[j - 1] = encode_label(i, j, horizon_);
  std::copy(trace.begin() + p, trace.end(), prev_.begin() + p);
  ++stats_.traces;
  ++stats_.lines;
  return line_;
}

const CommandLine& CampaignGenerator::finish() {
  line_.clear();
  for (std::size_t j = 1; j < horizon_; ++j) {
    if (free_slots_[j] > 0) {
      line_.push_back(SimCommand::free(free_slots_[j]));
      if (live_stored_[j] == free_slots_[j]) live_stored_[j] = 0;
      free_slots_[j] = 0;
      ++stats_.frees;
    }
  }
  if (auto pending = pending_store()) {
    throw IntegrityError("store label " + std::to_string(*pending) + " was never reached");
  }
  for (std::size_t h = 1; h <= horizon_; ++h) {
    if (live_stored_[h] != 0) {
      throw IntegrityError("stored label " + std::to_string(live_stored_[h]) + " is never loaded");
    }
  }
  if (!line_.empty()) ++stats_.lines;
  return line_;
}

Campaign generate_campaign(std::span<const Trace> sorted, std::span<const Label> load_labels,
                           std::span<const Label> store_labels, std::size_t horizon) {
  if (sorted.size() != load_labels.size()) {
    throw IntegrityError("dataset has " + std::to_string(sorted.size()) + " traces but " +
                         std::to_string(load_labels.size()) + " load labels");
  }
  std::size_t next_store = 0;
  CampaignGenerator gen(horizon, [&]() -> std::optional<Label> {
    if (next_store == store_labels.size()) return std::nullopt;
    return store_labels[next_store++];
  });
  Campaign out;
  for (std::size_t k = 0; k < sorted.size(); ++k) out.lines.push_back(gen.next_line(sorted[k], load_labels[k]));
  if (const auto& cleanup = gen.finish(); !cleanup.empty()) out.lines.push_back(cleanup);
  return out;
}

CampaignStats generate_campaign(const fs::path& sorted_dataset, const fs::path& load_labels,
                                const fs::path& store_labels, std::size_t horizon,
                                std::size_t buffer_bytes, std::ostream& out, bool check_integrity) {
  check_horizon(horizon);
  TraceReader dataset(sorted_dataset, horizon, buffer_bytes);
  TraceReader loads(load_labels, 1, buffer_bytes);
  TraceReader stores(store_labels, 1, buffer_bytes);
  if (dataset.record_count() != loads.record_count()) {
    throw IntegrityError("dataset has " + std::to_string(dataset.record_count()) + " traces but " +
                         std::to_string(loads.record_count()) + " load labels");
  }

  CampaignGenerator gen(
      horizon,
      [&stores]() -> std::optional<Label> {
        auto rec = stores.next();
        if (!rec) return std::nullopt;
        return (*rec)[0];
      },
      check_integrity);

  std::string text;
  text.reserve(buffer_bytes + 64);
  auto flush = [&] {
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    text.clear();
  };
  while (auto rec = dataset.next()) {
    const Label load = (*loads.next())[0];
    append_campaign_line(text, gen.next_line(*rec, load));
    text.push_back('\n');
    if (text.size() >= buffer_bytes) flush();
  }
  if (const auto& cleanup = gen.finish(); !cleanup.empty()) {
    append_campaign_line(text, cleanup);
    text.push_back('\n');
  }
  flush();
  out.flush();
  if (!out) throw IoError("campaign output stream failed");
  return gen.stats();
}

std::string CompressionStats::ratio_text() const {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", ratio());
  return buf;
}

CompressionStats campaign_stats(std::uint64_t traces, std::size_t horizon, const Campaign& campaign) {
  CompressionStats s;
  s.sim_d = traces * horizon;
  for (const auto& line : campaign.lines) {
    for (const auto& c : line) {
      if (c.kind == CommandKind::Run) s.sim_c += c.arg;
    }
  }
  return s;
}

CompressionStats campaign_stats(std::uint64_t traces, std::size_t horizon, std::istream& campaign) {
  CompressionStats s;
  s.sim_d = traces * horizon;
  CampaignReader reader(campaign, horizon);
  while (auto line = reader.next()) {
    for (const auto& c : *line) {
      if (c.kind == CommandKind::Run) s.sim_c += c.arg;
    }
  }
  return s;
}

}  // namespace simcamp
