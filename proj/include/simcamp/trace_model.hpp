#pragma once

// Domain types and the two wire formats of the toolchain: binary DT files
// (raw little-endian u64 disturbances, no header, no separators) and the
// line-oriented campaign text grammar.

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace simcamp {

/// 0 is the non-disturbance, any positive value an opaque fault id.
using Disturbance = std::uint64_t;

/// One scenario: exactly H disturbances.
using Trace = std::vector<Disturbance>;

/// Names a reusable simulator state. 0 is the initial state.
using Label = std::uint64_t;

inline constexpr std::size_t kMaxHorizon = std::size_t{1} << 20;
inline constexpr std::size_t kRecordWordBytes = sizeof(std::uint64_t);

class FormatError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class IntegrityError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised by the campaign parser; carries 1-based line and column.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& what);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Throws FormatError unless 1 <= horizon <= kMaxHorizon.
void check_horizon(std::size_t horizon);

/// Bytes occupied by one trace of the given horizon.
constexpr std::size_t record_bytes(std::size_t horizon) { return horizon * kRecordWordBytes; }

// Label arithmetic. A label encodes (trace i, interval j), 1 <= j <= H, as
// (i-1)*H + j. The remainder is 0 for j = H, which decodes as height H.
Label encode_label(std::uint64_t trace_index, std::size_t interval, std::size_t horizon);
std::size_t label_height(Label label, std::size_t horizon);
std::uint64_t label_owner(Label label, std::size_t horizon);

/// Strict lexicographic comparison on unsigned codes.
inline bool trace_less(std::span<const Disturbance> a, std::span<const Disturbance> b) {
  for (std::size_t k = 0; k < a.size() && k < b.size(); ++k) {
    if (a[k] != b[k]) return a[k] < b[k];
  }
  return a.size() < b.size();
}

// ---------------------------------------------------------------------------
// Binary DT files

/// Streams whole records out of a DT file through one buffer of at most
/// buffer_bytes (rounded down to whole records, at least one record).
class TraceReader {
 public:
  TraceReader(const std::filesystem::path& path, std::size_t horizon, std::size_t buffer_bytes);
  /// Reads only records [first, first + count) of the file.
  TraceReader(const std::filesystem::path& path, std::size_t horizon, std::size_t buffer_bytes,
              std::uint64_t first, std::uint64_t count);
  ~TraceReader();
  TraceReader(const TraceReader&) = delete;
  TraceReader& operator=(const TraceReader&) = delete;

  /// Next record, or nullopt at end of file. The span is valid until the
  /// next call.
  std::optional<std::span<const Disturbance>> next();

  std::size_t horizon() const { return horizon_; }
  std::uint64_t record_count() const { return record_count_; }
  /// Index (0-based, within the file) of the record returned by the last
  /// next().
  std::uint64_t position() const { return first_ + consumed_ - 1; }
  const std::filesystem::path& path() const { return path_; }

 private:
  bool refill();

  std::filesystem::path path_;
  std::FILE* file_ = nullptr;
  std::size_t horizon_;
  std::uint64_t first_ = 0;
  std::uint64_t record_count_ = 0;
  std::uint64_t loaded_ = 0;
  std::uint64_t consumed_ = 0;
  std::vector<Disturbance> buffer_;
  std::size_t buffered_records_ = 0;
  std::size_t cursor_ = 0;
};

/// Buffered writer of DT records. close() flushes and returns the byte count;
/// the destructor closes silently if close() was not called.
class TraceWriter {
 public:
  TraceWriter(const std::filesystem::path& path, std::size_t horizon, std::size_t buffer_bytes);
  ~TraceWriter();
  TraceWriter(const TraceWriter&) = delete;
  TraceWriter& operator=(const TraceWriter&) = delete;

  void write(std::span<const Disturbance> record);
  std::uint64_t close();
  std::uint64_t bytes_written() const { return bytes_; }

 private:
  void flush();

  std::filesystem::path path_;
  std::FILE* file_ = nullptr;
  std::size_t horizon_;
  std::vector<Disturbance> buffer_;
  std::size_t buffered_records_ = 0;
  std::uint64_t bytes_ = 0;
};

/// Number of whole records that fit in buffer_bytes (at least 1).
std::size_t records_per_buffer(std::size_t horizon, std::size_t buffer_bytes);

/// Reads the whole file; convenience for tests and small inputs.
std::vector<Trace> read_traces(const std::filesystem::path& path, std::size_t horizon,
                               std::size_t buffer_bytes = 1 << 16);

/// Writes all traces; returns the byte count.
std::uint64_t write_traces(std::span<const Trace> traces, const std::filesystem::path& path,
                           std::size_t horizon, std::size_t buffer_bytes = 1 << 16);

/// Raw u64 streams (label files are DT files with H = 1).
std::vector<std::uint64_t> read_words(const std::filesystem::path& path);
std::uint64_t write_words(std::span<const std::uint64_t> words, const std::filesystem::path& path);

/// Size in records; throws FormatError if the size is not a whole number of
/// records.
std::uint64_t count_records(const std::filesystem::path& path, std::size_t horizon);

// Buffer accounting. Every record buffer owned by the readers and writers
// above (and by the sort's run formation) is registered here so tests can
// assert the peak resident record storage.
namespace buffer_stats {
void reset_peak();
std::size_t current_bytes();
std::size_t peak_bytes();
void acquire(std::size_t bytes);
void release(std::size_t bytes);
}  // namespace buffer_stats

// ---------------------------------------------------------------------------
// Simulator commands and the campaign text grammar

enum class CommandKind { Load, Free, Inject, Run, Store };

struct SimCommand {
  CommandKind kind;
  std::uint64_t arg;

  static SimCommand load(Label l) { return {CommandKind::Load, l}; }
  static SimCommand free(Label l) { return {CommandKind::Free, l}; }
  static SimCommand inject(Disturbance d) { return {CommandKind::Inject, d}; }
  static SimCommand run(std::uint64_t t) { return {CommandKind::Run, t}; }
  static SimCommand store(Label l) { return {CommandKind::Store, l}; }

  friend bool operator==(const SimCommand&, const SimCommand&) = default;
};

char command_letter(CommandKind kind);
std::string_view command_name(CommandKind kind);

using CommandLine = std::vector<SimCommand>;

struct Campaign {
  std::vector<CommandLine> lines;
  friend bool operator==(const Campaign&, const Campaign&) = default;
};

/// "L2 I1 R1 S8 R2": single spaces, no trailing space, no newline.
std::string render_campaign_line(std::span<const SimCommand> commands);
void append_campaign_line(std::string& out, std::span<const SimCommand> commands);

/// Parses and validates one line against
///   F{0,H-1} L (I? R S?){1,H}
/// or, for the trailing cleanup line, F{1,}. With a horizon the F and group
/// counts are bounded as well. line_no is used for diagnostics only.
CommandLine parse_campaign_line(std::string_view text, std::size_t line_no,
                                std::optional<std::size_t> horizon = std::nullopt);

/// True if every command of the line is a Free.
bool is_cleanup_line(std::span<const SimCommand> commands);

/// Parses a whole campaign; a cleanup line is accepted only as the last
/// non-empty line.
Campaign parse_campaign(std::string_view text, std::optional<std::size_t> horizon = std::nullopt);
std::string render_campaign(const Campaign& campaign);

/// Pull-style line reader over a stream, enforcing the same grammar.
class CampaignReader {
 public:
  explicit CampaignReader(std::istream& in, std::optional<std::size_t> horizon = std::nullopt);
  /// Next non-empty line, or nullopt at end of input.
  std::optional<CommandLine> next();
  std::size_t line_number() const { return line_no_; }

 private:
  std::istream& in_;
  std::optional<std::size_t> horizon_;
  std::size_t line_no_ = 0;
  bool saw_cleanup_ = false;
  std::string buffer_;
};

}  // namespace simcamp
