#include "simcamp/dataset_gen.hpp"

#include <cmath>
#include <random>
#include <string>

namespace simcamp {

PrefixSkew parse_skew(std::string_view text) {
  if (text == "uniform") return PrefixSkew::Uniform;
  if (text == "zipf") return PrefixSkew::Zipf;
  throw FormatError("unknown prefix skew '" + std::string(text) + "' (expected zipf or uniform)");
}

void DatasetSpec::validate() const {
  check_horizon(horizon);
  if (kinds == 0) throw FormatError("need at least one disturbance kind");
  if (!(density >= 0.0 && density <= 1.0)) throw FormatError("density must lie in [0, 1]");
  if (skew == PrefixSkew::Zipf) {
    if (templates == 0) throw FormatError("zipf skew needs at least one template");
    if (!(zipf_exponent > 0)) throw FormatError("zipf exponent must be positive");
  }
}

struct DatasetGenerator::Impl {
  DatasetSpec spec;
  std::mt19937_64 rng;
  std::bernoulli_distribution hit;
  std::uniform_int_distribution<std::uint64_t> kind;
  std::uniform_int_distribution<std::size_t> cut;
  std::discrete_distribution<std::size_t> rank;
  std::vector<Trace> pool;

  explicit Impl(const DatasetSpec& s)
      : spec(s), rng(s.seed), hit(s.density), kind(1, s.kinds), cut(0, s.horizon) {
    if (spec.skew != PrefixSkew::Zipf) return;
    std::vector<double> weights;
    for (std::size_t k = 1; k <= spec.templates; ++k) {
      weights.push_back(1.0 / std::pow(static_cast<double>(k), spec.zipf_exponent));
    }
    rank = std::discrete_distribution<std::size_t>(weights.begin(), weights.end());
    pool.resize(spec.templates);
    for (auto& t : pool) fill(t, 0);
  }

  void fill(Trace& t, std::size_t from) {
    t.resize(spec.horizon);
    for (std::size_t j = from; j < spec.horizon; ++j) t[j] = hit(rng) ? kind(rng) : 0;
  }
};

DatasetGenerator::DatasetGenerator(const DatasetSpec& spec) {
  spec.validate();
  impl_ = std::make_unique<Impl>(spec);
}

DatasetGenerator::~DatasetGenerator() = default;

void DatasetGenerator::next(Trace& trace) {
  Impl& g = *impl_;
  if (g.spec.skew == PrefixSkew::Uniform) {
    g.fill(trace, 0);
    return;
  }
  const Trace& base = g.pool[g.rank(g.rng)];
  const std::size_t keep = g.cut(g.rng);
  trace.assign(base.begin(), base.begin() + static_cast<std::ptrdiff_t>(keep));
  g.fill(trace, keep);
}

std::vector<Trace> generate_dataset(const DatasetSpec& spec) {
  DatasetGenerator gen(spec);
  std::vector<Trace> out(spec.traces);
  for (auto& t : out) gen.next(t);
  return out;
}

std::uint64_t write_dataset(const DatasetSpec& spec, const std::filesystem::path& path,
                            std::size_t buffer_bytes) {
  DatasetGenerator gen(spec);
  TraceWriter writer(path, spec.horizon, buffer_bytes);
  Trace t;
  for (std::uint64_t i = 0; i < spec.traces; ++i) {
    gen.next(t);
    writer.write(t);
  }
  return writer.close();
}

}  // namespace simcamp
