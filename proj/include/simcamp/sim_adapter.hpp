#pragma once

// Simulator backends for the execution-time estimator. A backend answers two
// questions: how many integration steps the solver takes for run(t), and how
// long a command takes to execute on this machine.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "simcamp/trace_model.hpp"

namespace simcamp {

class AdapterError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// (adapter, model, disturbance set, machine) plus the interval length tau.
struct SimulationSetting {
  std::string adapter = "synthetic";
  std::string model = "synthetic";
  std::vector<Disturbance> disturbances{1, 2, 3};
  std::string machine = "local";
  double interval_seconds = 1.0;

  /// Throws AdapterError if the disturbance set is empty, contains 0, or
  /// tau <= 0.
  void validate() const;
};

struct TimedSample {
  CommandKind kind;
  double t = 0.0;  // Run only
  double elapsed = 0.0;
};

class SimulatorAdapter {
 public:
  virtual ~SimulatorAdapter() = default;

  virtual const SimulationSetting& setting() const = 0;
  /// Integration steps for run(t). Deterministic in t.
  virtual std::uint64_t step_count(double t) = 0;
  /// Executes run(t); returns elapsed wall-clock seconds.
  virtual double run(double t) = 0;
  /// Executes a non-run command; returns elapsed wall-clock seconds.
  virtual double command(CommandKind kind, std::uint64_t arg) = 0;

  /// Dispatches on the command kind. Run(k) executes run(k * time_unit).
  double execute(const SimCommand& cmd, double time_unit = 1.0);
};

/// Closed-form backend. Step count is flat at plateau_steps on (0, breakpoint]
/// and grows by slope steps per unit beyond. A run costs
/// c_fixed + c_step * steps; other commands cost their constant. Every
/// elapsed value is multiplied by exp(noise_sigma * Z), Z standard normal.
struct SyntheticParams {
  double plateau_steps = 120.0;
  double breakpoint = 0.4;
  double slope = 80.0 / 3.0;
  double c_fixed = 0.3;
  double c_step = 0.00075;
  double inject_seconds = 0.002;
  double store_seconds = 0.05;
  double load_seconds = 0.04;
  double free_seconds = 0.001;
  double noise_sigma = 0.0;
  std::uint64_t seed = 42;

  /// Sets one documented key; throws AdapterError for unknown keys or bad
  /// values.
  void set(const std::string& key, const std::string& value);

  /// Noiseless run-cost parameters implied by the closed form.
  double alpha() const { return c_fixed + c_step * plateau_steps; }
  double beta() const { return c_step * slope; }
  double gamma() const { return breakpoint; }
};

/// Reads "key = value" lines ('#' starts a comment). Keys not belonging to
/// the synthetic parameters (model, machine, tau, disturbances) go to the
/// setting.
void load_synthetic_config(const std::filesystem::path& path, SyntheticParams& params,
                           SimulationSetting& setting);

class SyntheticAdapter : public SimulatorAdapter {
 public:
  explicit SyntheticAdapter(SyntheticParams params = {}, SimulationSetting setting = {});

  const SimulationSetting& setting() const override { return setting_; }
  std::uint64_t step_count(double t) override;
  double run(double t) override;
  double command(CommandKind kind, std::uint64_t arg) override;

  /// Elapsed time without noise.
  double noiseless_run(double t) const;
  double noiseless_command(CommandKind kind) const;
  const SyntheticParams& params() const { return params_; }

 private:
  double noise();
  std::uint64_t steps(double t) const;

  SyntheticParams params_;
  SimulationSetting setting_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Replays samples from a text file of lines "<kind> <t-or-dash> <elapsed>",
/// kind one of run/inject/store/load/free. Step counts come from lines
/// "steps <t> <count>". Repeated queries for the same (kind, t) cycle
/// through the recorded values in file order.
class RecordedAdapter : public SimulatorAdapter {
 public:
  explicit RecordedAdapter(std::istream& in, SimulationSetting setting = {});
  static RecordedAdapter from_file(const std::filesystem::path& path, SimulationSetting setting = {});

  const SimulationSetting& setting() const override { return setting_; }
  std::uint64_t step_count(double t) override;
  double run(double t) override;
  double command(CommandKind kind, std::uint64_t arg) override;

 private:
  struct Series {
    std::vector<double> values;
    std::size_t cursor = 0;
  };
  Series* find(int kind, double t);

  SimulationSetting setting_;
  std::map<std::pair<int, double>, Series> samples_;
  std::map<double, std::uint64_t> steps_;
};

/// Forwards to another adapter and appends every answer to out in the
/// recorded-sample format, so a session can be replayed later.
class RecordingAdapter : public SimulatorAdapter {
 public:
  RecordingAdapter(SimulatorAdapter& inner, std::ostream& out) : inner_(inner), out_(out) {}

  const SimulationSetting& setting() const override { return inner_.setting(); }
  std::uint64_t step_count(double t) override;
  double run(double t) override;
  double command(CommandKind kind, std::uint64_t arg) override;

 private:
  SimulatorAdapter& inner_;
  std::ostream& out_;
};

}  // namespace simcamp
