#include "simcamp/trace_model.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cerrno>
#include <charconv>
#include <cstring>
#include <istream>
#include <limits>
#include <sstream>

namespace simcamp {

namespace {

std::uint64_t byteswap64(std::uint64_t v) {
  v = ((v & 0x00FF00FF00FF00FFull) << 8) | ((v >> 8) & 0x00FF00FF00FF00FFull);
  v = ((v & 0x0000FFFF0000FFFFull) << 16) | ((v >> 16) & 0x0000FFFF0000FFFFull);
  return (v << 32) | (v >> 32);
}

// The wire order is little-endian; on such hosts this is a no-op.
void to_wire_order(std::span<std::uint64_t> words) {
  if constexpr (std::endian::native != std::endian::little) {
    for (auto& w : words) w = byteswap64(w);
  }
}

std::string errno_text() { return std::strerror(errno); }

std::atomic<std::size_t> g_current{0};
std::atomic<std::size_t> g_peak{0};

}  // namespace

namespace buffer_stats {
void reset_peak() { g_peak.store(g_current.load()); }
std::size_t current_bytes() { return g_current.load(); }
std::size_t peak_bytes() { return g_peak.load(); }
void acquire(std::size_t bytes) {
  const std::size_t now = g_current.fetch_add(bytes) + bytes;
  std::size_t peak = g_peak.load();
  while (now > peak && !g_peak.compare_exchange_weak(peak, now)) {
  }
}
void release(std::size_t bytes) { g_current.fetch_sub(bytes); }
}  // namespace buffer_stats

ParseError::ParseError(std::size_t line, std::size_t column, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) +
                         ": " + what),
      line_(line),
      column_(column) {}

void check_horizon(std::size_t horizon) {
  if (horizon < 1 || horizon > kMaxHorizon) {
    throw FormatError("horizon " + std::to_string(horizon) + " outside [1, " +
                      std::to_string(kMaxHorizon) + "]");
  }
}

Label encode_label(std::uint64_t trace_index, std::size_t interval, std::size_t horizon) {
  if (trace_index < 1 || interval < 1 || interval > horizon) {
    throw std::invalid_argument("label coordinates out of range");
  }
  const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
  if (trace_index - 1 > (max - interval) / horizon) {
    throw FormatError("label for trace " + std::to_string(trace_index) + " overflows 64 bits");
  }
  return (trace_index - 1) * horizon + interval;
}

std::size_t label_height(Label label, std::size_t horizon) {
  if (label == 0) return 0;
  const std::size_t rem = static_cast<std::size_t>(label % horizon);
  return rem == 0 ? horizon : rem;
}

std::uint64_t label_owner(Label label, std::size_t horizon) {
  if (label == 0) return 0;
  return (label + horizon - 1) / horizon;
}

std::size_t records_per_buffer(std::size_t horizon, std::size_t buffer_bytes) {
  return std::max<std::size_t>(1, buffer_bytes / record_bytes(horizon));
}

std::uint64_t count_records(const std::filesystem::path& path, std::size_t horizon) {
  check_horizon(horizon);
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw IoError(path.string() + ": " + ec.message());
  const std::uint64_t rec = record_bytes(horizon);
  if (size % rec != 0) {
    throw FormatError(path.string() + ": size " + std::to_string(size) +
                      " bytes is not a multiple of the record size " + std::to_string(rec) +
                      " (H=" + std::to_string(horizon) + "); " + std::to_string(size % rec) +
                      " trailing bytes");
  }
  return size / rec;
}

// ---------------------------------------------------------------------------

TraceReader::TraceReader(const std::filesystem::path& path, std::size_t horizon,
                         std::size_t buffer_bytes)
    : TraceReader(path, horizon, buffer_bytes, 0, std::numeric_limits<std::uint64_t>::max()) {}

TraceReader::TraceReader(const std::filesystem::path& path, std::size_t horizon,
                         std::size_t buffer_bytes, std::uint64_t first, std::uint64_t count)
    : path_(path), horizon_(horizon), first_(first) {
  const std::uint64_t total = count_records(path, horizon);
  if (first > total) throw FormatError(path.string() + ": range starts past the end of the file");
  record_count_ = std::min(count, total - first);
  file_ = std::fopen(path.c_str(), "rb");
  if (!file_) throw IoError(path.string() + ": " + errno_text());
  if (first > 0 && ::fseeko(file_, static_cast<off_t>(first * record_bytes(horizon)), SEEK_SET) != 0) {
    std::fclose(file_);
    throw IoError(path.string() + ": " + errno_text());
  }
  buffer_.resize(records_per_buffer(horizon, buffer_bytes) * horizon);
  buffer_stats::acquire(buffer_.size() * kRecordWordBytes);
}

TraceReader::~TraceReader() {
  buffer_stats::release(buffer_.size() * kRecordWordBytes);
  if (file_) std::fclose(file_);
}

bool TraceReader::refill() {
  const std::size_t capacity = static_cast<std::size_t>(
      std::min<std::uint64_t>(buffer_.size() / horizon_, record_count_ - loaded_));
  if (capacity == 0) return false;
  const std::size_t got = std::fread(buffer_.data(), record_bytes(horizon_), capacity, file_);
  if (got < capacity) throw IoError(path_.string() + (std::ferror(file_) ? ": read failed" : ": file shrank while reading"));
  loaded_ += got;
  to_wire_order(std::span(buffer_.data(), got * horizon_));
  buffered_records_ = got;
  cursor_ = 0;
  return got > 0;
}

std::optional<std::span<const Disturbance>> TraceReader::next() {
  if (cursor_ == buffered_records_ && !refill()) return std::nullopt;
  std::span<const Disturbance> rec(buffer_.data() + cursor_ * horizon_, horizon_);
  ++cursor_;
  ++consumed_;
  return rec;
}

TraceWriter::TraceWriter(const std::filesystem::path& path, std::size_t horizon,
                         std::size_t buffer_bytes)
    : path_(path), horizon_(horizon) {
  check_horizon(horizon);
  file_ = std::fopen(path.c_str(), "wb");
  if (!file_) throw IoError(path.string() + ": " + errno_text());
  buffer_.resize(records_per_buffer(horizon, buffer_bytes) * horizon);
  buffer_stats::acquire(buffer_.size() * kRecordWordBytes);
}

TraceWriter::~TraceWriter() {
  if (file_) {
    try {
      flush();
    } catch (...) {
    }
    std::fclose(file_);
  }
  buffer_stats::release(buffer_.size() * kRecordWordBytes);
}

void TraceWriter::write(std::span<const Disturbance> record) {
  if (record.size() != horizon_) {
    throw FormatError("record of length " + std::to_string(record.size()) +
                      " written to a file with H=" + std::to_string(horizon_));
  }
  if (!file_) throw IoError(path_.string() + ": write after close");
  std::copy(record.begin(), record.end(), buffer_.begin() + buffered_records_ * horizon_);
  if (++buffered_records_ * horizon_ == buffer_.size()) flush();
}

void TraceWriter::flush() {
  if (buffered_records_ == 0) return;
  auto words = std::span(buffer_.data(), buffered_records_ * horizon_);
  to_wire_order(words);
  const std::size_t put = std::fwrite(words.data(), record_bytes(horizon_), buffered_records_, file_);
  if (put != buffered_records_) throw IoError(path_.string() + ": " + errno_text());
  bytes_ += static_cast<std::uint64_t>(put) * record_bytes(horizon_);
  buffered_records_ = 0;
}

std::uint64_t TraceWriter::close() {
  if (file_) {
    flush();
    const int rc = std::fclose(file_);
    file_ = nullptr;
    if (rc != 0) throw IoError(path_.string() + ": " + errno_text());
  }
  return bytes_;
}

std::vector<Trace> read_traces(const std::filesystem::path& path, std::size_t horizon,
                               std::size_t buffer_bytes) {
  TraceReader reader(path, horizon, buffer_bytes);
  std::vector<Trace> out;
  out.reserve(reader.record_count());
  while (auto rec = reader.next()) out.emplace_back(rec->begin(), rec->end());
  return out;
}

std::uint64_t write_traces(std::span<const Trace> traces, const std::filesystem::path& path,
                           std::size_t horizon, std::size_t buffer_bytes) {
  TraceWriter writer(path, horizon, buffer_bytes);
  for (const auto& t : traces) writer.write(t);
  return writer.close();
}

std::vector<std::uint64_t> read_words(const std::filesystem::path& path) {
  std::vector<std::uint64_t> out;
  TraceReader reader(path, 1, 1 << 16);
  out.reserve(reader.record_count());
  while (auto rec = reader.next()) out.push_back((*rec)[0]);
  return out;
}

std::uint64_t write_words(std::span<const std::uint64_t> words, const std::filesystem::path& path) {
  TraceWriter writer(path, 1, 1 << 16);
  for (std::size_t k = 0; k < words.size(); ++k) writer.write(words.subspan(k, 1));
  return writer.close();
}

// ---------------------------------------------------------------------------

char command_letter(CommandKind kind) {
  switch (kind) {
    case CommandKind::Load: return 'L';
    case CommandKind::Free: return 'F';
    case CommandKind::Inject: return 'I';
    case CommandKind::Run: return 'R';
    case CommandKind::Store: return 'S';
  }
  return '?';
}

std::string_view command_name(CommandKind kind) {
  switch (kind) {
    case CommandKind::Load: return "load";
    case CommandKind::Free: return "free";
    case CommandKind::Inject: return "inject";
    case CommandKind::Run: return "run";
    case CommandKind::Store: return "store";
  }
  return "?";
}

void append_campaign_line(std::string& out, std::span<const SimCommand> commands) {
  char digits[24];
  for (std::size_t k = 0; k < commands.size(); ++k) {
    if (k) out.push_back(' ');
    out.push_back(command_letter(commands[k].kind));
    auto [end, ec] = std::to_chars(digits, digits + sizeof digits, commands[k].arg);
    out.append(digits, end);
  }
}

std::string render_campaign_line(std::span<const SimCommand> commands) {
  std::string out;
  append_campaign_line(out, commands);
  return out;
}

bool is_cleanup_line(std::span<const SimCommand> commands) {
  return !commands.empty() && std::all_of(commands.begin(), commands.end(), [](const SimCommand& c) {
    return c.kind == CommandKind::Free;
  });
}

CommandLine parse_campaign_line(std::string_view text, std::size_t line_no,
                                std::optional<std::size_t> horizon) {
  CommandLine out;
  if (text.empty()) throw ParseError(line_no, 1, "empty line");

  // Tokenise: exactly one space between tokens, none leading or trailing.
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t col = pos + 1;
    if (pos == text.size() || text[pos] == ' ') throw ParseError(line_no, col, "expected a command");
    const std::size_t end = std::min(text.find(' ', pos), text.size());
    const std::string_view tok = text.substr(pos, end - pos);

    CommandKind kind;
    switch (tok[0]) {
      case 'L': kind = CommandKind::Load; break;
      case 'F': kind = CommandKind::Free; break;
      case 'I': kind = CommandKind::Inject; break;
      case 'R': kind = CommandKind::Run; break;
      case 'S': kind = CommandKind::Store; break;
      default:
        throw ParseError(line_no, col, "unknown command '" + std::string(1, tok[0]) + "'");
    }
    const std::string_view digits = tok.substr(1);
    if (digits.empty()) throw ParseError(line_no, col + 1, "missing integer argument");
    if (digits.size() > 1 && digits[0] == '0') throw ParseError(line_no, col + 1, "leading zero");
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (ec == std::errc::result_out_of_range) {
      throw ParseError(line_no, col + 1, "integer exceeds 64 bits");
    }
    if (ec != std::errc() || ptr != digits.data() + digits.size()) {
      throw ParseError(line_no, col + 1 + (ptr - digits.data()), "malformed integer");
    }
    if (kind == CommandKind::Run && value == 0) throw ParseError(line_no, col, "R requires t >= 1");
    if (kind == CommandKind::Inject && value == 0) throw ParseError(line_no, col, "I requires a code > 0");
    out.push_back({kind, value});

    if (end == text.size()) break;
    pos = end + 1;
  }

  // Grammar check: F* L (I? R S?)+  |  F+
  enum class State { Frees, AfterLoad, AfterInject, AfterRun, AfterStore };
  State state = State::Frees;
  std::size_t frees = 0, runs = 0;
  std::size_t col = 1;
  for (const auto& cmd : out) {
    auto fail = [&](const char* what) { throw ParseError(line_no, col, what); };
    switch (cmd.kind) {
      case CommandKind::Free:
        if (state != State::Frees) fail("F must precede L");
        ++frees;
        break;
      case CommandKind::Load:
        if (state != State::Frees) fail("only one L per line");
        state = State::AfterLoad;
        break;
      case CommandKind::Inject:
        if (state == State::Frees) fail("I before L");
        if (state == State::AfterInject) fail("I must be followed by R");
        state = State::AfterInject;
        break;
      case CommandKind::Run:
        if (state == State::Frees) fail("R before L");
        ++runs;
        state = State::AfterRun;
        break;
      case CommandKind::Store:
        if (state != State::AfterRun) fail("S must follow R");
        state = State::AfterStore;
        break;
    }
    col += 1 + std::to_string(cmd.arg).size() + 1;
  }
  const std::size_t end_col = text.size() + 1;
  if (state == State::AfterLoad) throw ParseError(line_no, end_col, "L must be followed by at least one R");
  if (state == State::AfterInject) throw ParseError(line_no, end_col, "I must be followed by R");
  if (horizon) {
    if (frees > (*horizon > 0 ? *horizon - 1 : 0)) {
      throw ParseError(line_no, 1, "more than H-1 F commands");
    }
    if (runs > *horizon) throw ParseError(line_no, 1, "more than H run groups");
  }
  return out;
}

Campaign parse_campaign(std::string_view text, std::optional<std::size_t> horizon) {
  std::string owned(text);
  std::istringstream in(owned);
  CampaignReader reader(in, horizon);
  Campaign out;
  while (auto line = reader.next()) out.lines.push_back(std::move(*line));
  return out;
}

std::string render_campaign(const Campaign& campaign) {
  std::string out;
  for (const auto& line : campaign.lines) {
    append_campaign_line(out, line);
    out.push_back('\n');
  }
  return out;
}

CampaignReader::CampaignReader(std::istream& in, std::optional<std::size_t> horizon)
    : in_(in), horizon_(horizon) {}

std::optional<CommandLine> CampaignReader::next() {
  while (std::getline(in_, buffer_)) {
    ++line_no_;
    if (buffer_.empty()) continue;
    if (saw_cleanup_) throw ParseError(line_no_, 1, "commands after the trailing cleanup line");
    CommandLine line = parse_campaign_line(buffer_, line_no_, horizon_);
    if (is_cleanup_line(line)) saw_cleanup_ = true;
    return line;
  }
  return std::nullopt;
}

}  // namespace simcamp
