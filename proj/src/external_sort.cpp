#include "simcamp/external_sort.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <numeric>
#include <optional>
#include <utility>

#include <unistd.h>

namespace simcamp {

namespace fs = std::filesystem;

namespace {

fs::path next_temp_path(const fs::path& dir) {
  static std::atomic<std::uint64_t> counter{0};
  return dir / ("simcamp-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + ".run");
}

fs::path resolve_temp_dir(const SortBudget& budget) {
  fs::path dir = budget.temp_dir.empty() ? default_temp_dir() : budget.temp_dir;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("temp dir " + dir.string() + " is not a directory");
  return dir;
}

// Owns the chunk buffer used during run formation and registers it with the
// buffer accounting.
class ChunkBuffer {
 public:
  explicit ChunkBuffer(std::size_t words) : data_(words) {
    buffer_stats::acquire(words * kRecordWordBytes);
  }
  ~ChunkBuffer() { buffer_stats::release(data_.size() * kRecordWordBytes); }
  std::uint64_t* data() { return data_.data(); }

 private:
  std::vector<std::uint64_t> data_;
};

class RawFile {
 public:
  RawFile(const fs::path& path, const char* mode) : path_(path), f_(std::fopen(path.c_str(), mode)) {
    if (!f_) throw IoError(path.string() + ": " + std::strerror(errno));
  }
  ~RawFile() {
    if (f_) std::fclose(f_);
  }
  std::FILE* get() { return f_; }
  void close() {
    if (f_ && std::fclose(f_) != 0) {
      f_ = nullptr;
      throw IoError(path_.string() + ": " + std::strerror(errno));
    }
    f_ = nullptr;
  }

 private:
  fs::path path_;
  std::FILE* f_;
};

void put_record(RawFile& out, const fs::path& path, const std::uint64_t* rec, std::size_t horizon) {
  if constexpr (std::endian::native == std::endian::little) {
    if (std::fwrite(rec, record_bytes(horizon), 1, out.get()) != 1) {
      throw IoError(path.string() + ": " + std::strerror(errno));
    }
  } else {
    std::vector<std::uint64_t> tmp(rec, rec + horizon);
    for (auto& w : tmp) {
      std::uint64_t v = 0;
      for (int b = 0; b < 8; ++b) v |= ((w >> (8 * b)) & 0xFF) << (8 * (7 - b));
      w = v;
    }
    if (std::fwrite(tmp.data(), record_bytes(horizon), 1, out.get()) != 1) {
      throw IoError(path.string() + ": " + std::strerror(errno));
    }
  }
}

void move_file(const fs::path& from, const fs::path& to) {
  std::error_code ec;
  fs::rename(from, to, ec);
  if (!ec) return;
  fs::copy_file(from, to, fs::copy_options::overwrite_existing, ec);
  if (ec) throw IoError("cannot move " + from.string() + " to " + to.string() + ": " + ec.message());
  fs::remove(from);
}

}  // namespace

fs::path default_temp_dir() {
  if (const char* env = std::getenv("TMPDIR"); env && *env) return fs::path(env);
  return fs::temp_directory_path();
}

void check_budget(const SortBudget& budget, std::size_t horizon) {
  check_horizon(horizon);
  const std::size_t min = 2 * record_bytes(horizon);
  if (budget.buffer_bytes < min) {
    throw FormatError("buffer of " + std::to_string(budget.buffer_bytes) +
                      " bytes is smaller than two records (" + std::to_string(min) + " bytes for H=" +
                      std::to_string(horizon) + ")");
  }
}

namespace {

// Reads the input chunk by chunk, sorts each chunk in memory and hands it to
// emit_run as a sequence of records to write.
template <class BeginRun, class EndRun>
void form_runs(const fs::path& input, std::size_t horizon, const SortBudget& budget, bool unique,
               BeginRun begin_run, EndRun end_run) {
  std::uint64_t remaining = count_records(input, horizon);
  const std::size_t chunk_records = budget.buffer_bytes / record_bytes(horizon);

  RawFile in(input, "rb");
  ChunkBuffer chunk(chunk_records * horizon);
  std::vector<std::uint32_t> order;

  while (remaining > 0) {
    const std::size_t n = static_cast<std::size_t>(std::min<std::uint64_t>(remaining, chunk_records));
    if (std::fread(chunk.data(), record_bytes(horizon), n, in.get()) != n) {
      throw IoError(input.string() + ": short read");
    }
    if constexpr (std::endian::native != std::endian::little) {
      for (std::size_t k = 0; k < n * horizon; ++k) {
        std::uint64_t w = chunk.data()[k], v = 0;
        for (int b = 0; b < 8; ++b) v |= ((w >> (8 * b)) & 0xFF) << (8 * (7 - b));
        chunk.data()[k] = v;
      }
    }
    remaining -= n;

    auto put = begin_run();
    std::uint64_t written = 0;
    std::uint64_t* base = chunk.data();
    if (horizon == 1) {
      std::sort(base, base + n);
      const std::uint64_t* end = unique ? std::unique(base, base + n) : base + n;
      for (const std::uint64_t* p = base; p != end; ++p, ++written) put(p);
    } else {
      order.resize(n);
      std::iota(order.begin(), order.end(), 0u);
      auto rec = [&](std::uint32_t k) { return base + static_cast<std::size_t>(k) * horizon; };
      std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        return std::lexicographical_compare(rec(a), rec(a) + horizon, rec(b), rec(b) + horizon);
      });
      const std::uint64_t* last = nullptr;
      for (std::uint32_t k : order) {
        const std::uint64_t* r = rec(k);
        if (unique && last && std::equal(r, r + horizon, last)) continue;
        put(r);
        ++written;
        last = r;
      }
    }
    end_run(written);
  }
}

std::uint64_t merge_streams(TraceReader& a, TraceReader& b, TraceWriter& out, std::size_t horizon,
                            bool unique) {
  std::vector<Disturbance> prev_a, prev_b, last;
  bool have_last = false;
  std::uint64_t written = 0;

  auto fetch = [&](TraceReader& r, std::vector<Disturbance>& prev) {
    auto rec = r.next();
    if (rec) {
      if (!prev.empty() && trace_less(*rec, prev)) {
        throw IntegrityError(r.path().string() + ": input not sorted; first inversion at byte offset " +
                             std::to_string(r.position() * record_bytes(horizon)) + " (record " +
                             std::to_string(r.position()) + ")");
      }
      prev.assign(rec->begin(), rec->end());
    }
    return rec;
  };
  auto emit = [&](std::span<const Disturbance> rec) {
    if (unique && have_last && std::equal(rec.begin(), rec.end(), last.begin())) return;
    out.write(rec);
    ++written;
    if (unique) {
      last.assign(rec.begin(), rec.end());
      have_last = true;
    }
  };

  auto ra = fetch(a, prev_a);
  auto rb = fetch(b, prev_b);
  while (ra && rb) {
    if (!trace_less(*rb, *ra)) {
      emit(*ra);
      ra = fetch(a, prev_a);
    } else {
      emit(*rb);
      rb = fetch(b, prev_b);
    }
  }
  for (; ra; ra = fetch(a, prev_a)) emit(*ra);
  for (; rb; rb = fetch(b, prev_b)) emit(*rb);
  return written;
}

// Removes a temp file on scope exit unless released.
class TempFile {
 public:
  explicit TempFile(fs::path path) : path_(std::move(path)) {}
  ~TempFile() {
    if (path_.empty()) return;
    std::error_code ec;
    fs::remove(path_, ec);
  }
  TempFile(TempFile&& other) noexcept : path_(std::exchange(other.path_, {})) {}
  TempFile& operator=(TempFile&& other) noexcept {
    if (this != &other) {
      TempFile dropped(std::move(*this));
      path_ = std::exchange(other.path_, {});
    }
    return *this;
  }
  const fs::path& path() const { return path_; }
  fs::path release() { return std::exchange(path_, {}); }

 private:
  fs::path path_;
};

}  // namespace

std::vector<fs::path> sort_runs(const fs::path& input, std::size_t horizon, const SortBudget& budget,
                                bool unique) {
  check_budget(budget, horizon);
  const fs::path dir = resolve_temp_dir(budget);
  std::vector<TempFile> files;
  std::optional<RawFile> out;
  form_runs(
      input, horizon, budget, unique,
      [&] {
        files.emplace_back(next_temp_path(dir));
        out.emplace(files.back().path(), "wb");
        return [&](const std::uint64_t* rec) { put_record(*out, files.back().path(), rec, horizon); };
      },
      [&](std::uint64_t) { out->close(); });
  std::vector<fs::path> runs;
  for (auto& f : files) runs.push_back(f.release());
  return runs;
}

std::uint64_t merge_pair(const fs::path& run_a, const fs::path& run_b, std::size_t horizon,
                         const SortBudget& budget, bool unique, const fs::path& output) {
  check_budget(budget, horizon);
  TraceReader a(run_a, horizon, budget.buffer_bytes);
  TraceReader b(run_b, horizon, budget.buffer_bytes);
  TraceWriter out(output, horizon, budget.buffer_bytes);
  const std::uint64_t written = merge_streams(a, b, out, horizon, unique);
  out.close();
  return written;
}

void sort_file(const fs::path& input, std::size_t horizon, const SortBudget& budget, bool unique,
               const fs::path& output) {
  check_budget(budget, horizon);
  const fs::path dir = resolve_temp_dir(budget);

  // Every pass lives in a single file holding its runs back to back; lengths
  // records where each run ends.
  TempFile pass(next_temp_path(dir));
  std::vector<std::uint64_t> lengths;
  {
    RawFile out(pass.path(), "wb");
    form_runs(
        input, horizon, budget, unique,
        [&] { return [&](const std::uint64_t* rec) { put_record(out, pass.path(), rec, horizon); }; },
        [&](std::uint64_t n) { lengths.push_back(n); });
    out.close();
  }

  while (lengths.size() > 1) {
    TempFile next(next_temp_path(dir));
    std::vector<std::uint64_t> next_lengths;
    TraceWriter out(next.path(), horizon, budget.buffer_bytes);
    std::uint64_t offset = 0;
    for (std::size_t k = 0; k < lengths.size(); k += 2) {
      if (k + 1 == lengths.size()) {
        // Odd run out: carried into the next pass unchanged.
        TraceReader tail(pass.path(), horizon, budget.buffer_bytes, offset, lengths[k]);
        while (auto rec = tail.next()) out.write(*rec);
        next_lengths.push_back(lengths[k]);
        break;
      }
      TraceReader a(pass.path(), horizon, budget.buffer_bytes, offset, lengths[k]);
      TraceReader b(pass.path(), horizon, budget.buffer_bytes, offset + lengths[k], lengths[k + 1]);
      next_lengths.push_back(merge_streams(a, b, out, horizon, unique));
      offset += lengths[k] + lengths[k + 1];
    }
    out.close();
    pass = std::move(next);
    lengths = std::move(next_lengths);
  }
  move_file(pass.release(), output);
}

}  // namespace simcamp
