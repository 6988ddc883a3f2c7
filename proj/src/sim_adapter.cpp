#include "simcamp/sim_adapter.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace simcamp {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size() || !std::isfinite(v)) {
    throw AdapterError("bad value '" + value + "' for " + key);
  }
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw AdapterError("bad value '" + value + "' for " + key);
  }
  return v;
}

std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

int kind_key(CommandKind kind) { return static_cast<int>(kind); }

}  // namespace

void SimulationSetting::validate() const {
  if (disturbances.empty()) throw AdapterError("disturbance set is empty");
  for (Disturbance d : disturbances) {
    if (d == 0) throw AdapterError("disturbance set contains the non-disturbance 0");
  }
  if (!(interval_seconds > 0)) throw AdapterError("interval length tau must be positive");
}

double SimulatorAdapter::execute(const SimCommand& cmd, double time_unit) {
  if (cmd.kind == CommandKind::Run) return run(static_cast<double>(cmd.arg) * time_unit);
  return command(cmd.kind, cmd.arg);
}

void SyntheticParams::set(const std::string& key, const std::string& value) {
  auto positive = [&](double& field) {
    field = parse_double(key, value);
    if (!(field > 0)) throw AdapterError(key + " must be positive");
  };
  auto non_negative = [&](double& field) {
    field = parse_double(key, value);
    if (field < 0) throw AdapterError(key + " must be non-negative");
  };
  if (key == "plateau_steps") positive(plateau_steps);
  else if (key == "breakpoint") non_negative(breakpoint);
  else if (key == "slope") non_negative(slope);
  else if (key == "c_fixed") positive(c_fixed);
  else if (key == "c_step") non_negative(c_step);
  else if (key == "inject") positive(inject_seconds);
  else if (key == "store") positive(store_seconds);
  else if (key == "load") positive(load_seconds);
  else if (key == "free") positive(free_seconds);
  else if (key == "noise") non_negative(noise_sigma);
  else if (key == "seed") seed = parse_u64(key, value);
  else throw AdapterError("unknown synthetic parameter '" + key + "'");
}

void load_synthetic_config(const std::filesystem::path& path, SyntheticParams& params,
                           SimulationSetting& setting) {
  std::ifstream in(path);
  if (!in) throw AdapterError(path.string() + ": cannot open");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw AdapterError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "model") {
        setting.model = value;
      } else if (key == "machine") {
        setting.machine = value;
      } else if (key == "tau") {
        setting.interval_seconds = parse_double(key, value);
      } else if (key == "disturbances") {
        setting.disturbances.clear();
        std::stringstream ss(value);
        std::string item;
        while (std::getline(ss, item, ',')) setting.disturbances.push_back(parse_u64(key, trim(item)));
      } else {
        params.set(key, value);
      }
    } catch (const AdapterError& e) {
      throw AdapterError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  setting.validate();
}

// ---------------------------------------------------------------------------

SyntheticAdapter::SyntheticAdapter(SyntheticParams params, SimulationSetting setting)
    : params_(params), setting_(std::move(setting)), rng_(params.seed) {
  setting_.adapter = "synthetic";
  setting_.validate();
}

std::uint64_t SyntheticAdapter::steps(double t) const {
  if (!(t > 0)) throw AdapterError("run(t) requires t > 0, got " + format_double(t));
  double n = params_.plateau_steps;
  if (t > params_.breakpoint) n += params_.slope * (t - params_.breakpoint);
  return static_cast<std::uint64_t>(std::max(1.0, std::round(n)));
}

std::uint64_t SyntheticAdapter::step_count(double t) { return steps(t); }

double SyntheticAdapter::noise() {
  if (params_.noise_sigma == 0) return 1.0;
  return std::exp(params_.noise_sigma * normal_(rng_));
}

double SyntheticAdapter::noiseless_run(double t) const {
  return params_.c_fixed + params_.c_step * static_cast<double>(steps(t));
}

double SyntheticAdapter::noiseless_command(CommandKind kind) const {
  switch (kind) {
    case CommandKind::Inject: return params_.inject_seconds;
    case CommandKind::Store: return params_.store_seconds;
    case CommandKind::Load: return params_.load_seconds;
    case CommandKind::Free: return params_.free_seconds;
    case CommandKind::Run: break;
  }
  throw AdapterError("run has no constant cost");
}

double SyntheticAdapter::run(double t) { return noiseless_run(t) * noise(); }

double SyntheticAdapter::command(CommandKind kind, std::uint64_t /*arg*/) {
  return noiseless_command(kind) * noise();
}

// ---------------------------------------------------------------------------

RecordedAdapter::RecordedAdapter(std::istream& in, SimulationSetting setting)
    : setting_(std::move(setting)) {
  setting_.adapter = "recorded";
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string kind, t, value, extra;
    if (!(fields >> kind >> t >> value) || (fields >> extra)) {
      throw AdapterError("recorded samples line " + std::to_string(line_no) +
                         ": expected '<kind> <t-or-dash> <value>'");
    }
    try {
      if (kind == "steps") {
        steps_[parse_double("t", t)] = parse_u64("steps", value);
        continue;
      }
      int key = -1;
      for (CommandKind k : {CommandKind::Load, CommandKind::Free, CommandKind::Inject,
                            CommandKind::Run, CommandKind::Store}) {
        if (kind == command_name(k)) key = kind_key(k);
      }
      if (key < 0) throw AdapterError("unknown kind '" + kind + "'");
      const bool is_run = key == kind_key(CommandKind::Run);
      if (is_run == (t == "-")) {
        throw AdapterError(is_run ? "run needs a t value" : "only run takes a t value");
      }
      const double elapsed = parse_double("elapsed", value);
      if (!(elapsed > 0)) throw AdapterError("elapsed must be positive");
      samples_[{key, is_run ? parse_double("t", t) : 0.0}].values.push_back(elapsed);
    } catch (const AdapterError& e) {
      throw AdapterError("recorded samples line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

RecordedAdapter RecordedAdapter::from_file(const std::filesystem::path& path, SimulationSetting setting) {
  std::ifstream in(path);
  if (!in) throw AdapterError(path.string() + ": cannot open");
  return RecordedAdapter(in, std::move(setting));
}

RecordedAdapter::Series* RecordedAdapter::find(int kind, double t) {
  const double tol = 1e-9 * std::max(1.0, std::abs(t));
  auto it = samples_.lower_bound({kind, t - tol});
  if (it == samples_.end() || it->first.first != kind || it->first.second > t + tol) return nullptr;
  return &it->second;
}

std::uint64_t RecordedAdapter::step_count(double t) {
  const double tol = 1e-9 * std::max(1.0, std::abs(t));
  auto it = steps_.lower_bound(t - tol);
  if (it == steps_.end() || it->first > t + tol) {
    throw AdapterError("no recorded step count for t=" + format_double(t));
  }
  return it->second;
}

double RecordedAdapter::run(double t) {
  Series* s = find(kind_key(CommandKind::Run), t);
  if (!s) throw AdapterError("no recorded sample for run t=" + format_double(t));
  const double v = s->values[s->cursor];
  s->cursor = (s->cursor + 1) % s->values.size();
  return v;
}

double RecordedAdapter::command(CommandKind kind, std::uint64_t /*arg*/) {
  Series* s = find(kind_key(kind), 0.0);
  if (!s) throw AdapterError("no recorded sample for " + std::string(command_name(kind)));
  const double v = s->values[s->cursor];
  s->cursor = (s->cursor + 1) % s->values.size();
  return v;
}

std::uint64_t RecordingAdapter::step_count(double t) {
  const std::uint64_t n = inner_.step_count(t);
  out_ << "steps " << format_double(t) << ' ' << n << '\n';
  return n;
}

double RecordingAdapter::run(double t) {
  const double v = inner_.run(t);
  out_ << "run " << format_double(t) << ' ' << format_double(v) << '\n';
  return v;
}

double RecordingAdapter::command(CommandKind kind, std::uint64_t arg) {
  const double v = inner_.command(kind, arg);
  out_ << command_name(kind) << " - " << format_double(v) << '\n';
  return v;
}

}  // namespace simcamp
