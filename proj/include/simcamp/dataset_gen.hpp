#pragma once

// Seeded random DT datasets for tests and benchmarks. Output is a pure
// function of the spec, so the same seed gives the same bytes.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string_view>
#include <vector>

#include "simcamp/trace_model.hpp"

namespace simcamp {

enum class PrefixSkew {
  /// Every interval drawn independently.
  Uniform,
  /// Traces copy a prefix of a Zipf-chosen template, so popular prefixes are
  /// shared by many traces.
  Zipf,
};

PrefixSkew parse_skew(std::string_view text);

struct DatasetSpec {
  std::uint64_t traces = 1000;
  std::size_t horizon = 10;
  /// Disturbance codes are drawn from 1..kinds.
  std::uint64_t kinds = 4;
  /// Probability that an interval carries a disturbance rather than 0.
  double density = 0.3;
  PrefixSkew skew = PrefixSkew::Zipf;
  std::size_t templates = 64;
  double zipf_exponent = 1.1;
  std::uint64_t seed = 1;

  /// Throws FormatError on out-of-range values.
  void validate() const;
};

/// Pull-style generator; nothing is kept beyond the template pool.
class DatasetGenerator {
 public:
  explicit DatasetGenerator(const DatasetSpec& spec);
  ~DatasetGenerator();
  DatasetGenerator(const DatasetGenerator&) = delete;
  DatasetGenerator& operator=(const DatasetGenerator&) = delete;

  /// Fills trace (resized to H) with the next record.
  void next(Trace& trace);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::vector<Trace> generate_dataset(const DatasetSpec& spec);

/// Streams spec.traces records to path. Returns bytes written.
std::uint64_t write_dataset(const DatasetSpec& spec, const std::filesystem::path& path,
                            std::size_t buffer_bytes = 1 << 20);

}  // namespace simcamp
