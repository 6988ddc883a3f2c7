#pragma once

// Execution-time estimation for simulation campaigns.
//
// run(t) cost is modelled as a two-segment piecewise linear function
//
//   run_S(t) = alpha                        for t <= gamma
//            = alpha + beta * (t - gamma)    for t >  gamma
//
// and every other command by a per-kind constant. Parameters are trained on
// samples gathered by executing a small synthetic campaign whose run
// arguments are picked from the solver's integration-step behaviour.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "simcamp/sim_adapter.hpp"
#include "simcamp/trace_model.hpp"

namespace simcamp {

class EstimatorError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// 10^exponent, computed so that negative decades are correctly rounded.
double pow10(int exponent);

/// Exponent e with t == 10^e; throws EstimatorError otherwise.
int decade_exponent(double t);

// ---------------------------------------------------------------------------
// Probing

/// Walks t = 10^0, 10^-1, ... until two consecutive step counts agree and
/// returns the larger t of the pair. Gives up below 10^floor_exponent.
double find_t_min(SimulatorAdapter& adapter, int floor_exponent = -12);

/// Walks t_i = t_min * 10^(i-1). From i = 3 on, fits a least-squares line to
/// the earlier (t_j, N_j) and stops once |N_i / fit(t_i) - 1| < epsilon.
double find_t_max(SimulatorAdapter& adapter, double t_min, double epsilon,
                  int max_iterations = 15);

/// Ten equidistant values per decade between t_min and t_max, decade
/// boundaries shared: 9 * (b - a) + 1 values for t_min = 10^a, t_max = 10^b.
std::vector<double> build_T(double t_min, double t_max);

struct ProbeResult {
  double t_min = 0;
  double t_max = 0;
  double epsilon = 0;
  std::vector<double> t_values;
};

ProbeResult probe(SimulatorAdapter& adapter, double epsilon);

// ---------------------------------------------------------------------------
// Training campaign

/// Run arguments are integers in units of time_unit (the smallest t).
struct TrainingCampaign {
  Campaign campaign;
  double time_unit = 1.0;
};

/// One line per t: it resumes the state stored by the previous line, runs t,
/// and stores the result under a fresh label; the state two lines back is
/// freed. Each disturbance is injected once, on the first lines. A final
/// line loads the last label and a cleanup line frees it.
TrainingCampaign build_training_campaign(std::span<const double> t_values,
                                         std::span<const Disturbance> disturbances);

/// Executes the campaign `repetitions` times and records every command.
std::vector<TimedSample> collect_samples(SimulatorAdapter& adapter, const TrainingCampaign& campaign,
                                         int repetitions);

// ---------------------------------------------------------------------------
// Fitting

struct PredictionModel {
  double alpha = 0;
  double beta = 0;
  double gamma = 0;
  double const_inject = 0;
  double const_store = 0;
  double const_load = 0;
  double const_free = 0;
  double err = 0;  // training error, fraction (0.028 == 2.8%)
  double t_min = 0;
  double t_max = 0;
  double epsilon = 0;
  std::uint64_t seed = 0;
};

struct RunSample {
  double t;
  double elapsed;
};

/// Sum over the two segments (t < gamma, t >= gamma) of the relative RMSE.
/// An empty segment contributes 0.
double segment_error(std::span<const RunSample> samples, double alpha, double beta, double gamma);

struct CandidateFit {
  double gamma = 0;
  double seed_alpha = 0;
  double seed_beta = 0;
  double seed_err = 0;
  double alpha = 0;
  double beta = 0;
  double err = 0;
};

/// Breakpoint candidates: distinct observed t plus geometric midpoints of
/// neighbours, keeping those with at least two distinct t on each side. For
/// each, the relative-error-optimal constant seeds alpha, a weighted least
/// squares fit seeds beta, and a 1-D convex search over alpha (beta solved
/// exactly, clamped at 0) refines without ever increasing the error.
std::vector<CandidateFit> fit_candidates(std::span<const RunSample> samples);

/// Best candidate (ties go to the smallest gamma) plus per-command constants
/// as sample means. Throws EstimatorError if no candidate has two distinct t
/// on both sides.
PredictionModel fit(std::span<const TimedSample> samples);

// ---------------------------------------------------------------------------
// Prediction

double run_estimate(const PredictionModel& model, double t);
double predict_command(const PredictionModel& model, const SimCommand& cmd, double time_unit = 1.0);
double predict_campaign(const PredictionModel& model, const Campaign& campaign, double time_unit = 1.0);
/// Streams the campaign text; nothing is materialised beyond one line.
double predict_campaign(const PredictionModel& model, std::istream& campaign, double time_unit = 1.0);

void save_model(const PredictionModel& model, std::ostream& out);
PredictionModel load_model(std::istream& in);

// ---------------------------------------------------------------------------
// Validation

struct ValidationReport {
  std::vector<double> set_errors;  // mean relative error of each set
  double mean = 0;
  double min = 0;
  double max = 0;
  double stddev = 0;
  /// Set errors binned by whole percent: [0,1%), ..., [9%,10%), >= 10%.
  std::vector<std::size_t> histogram;
};

/// K validation sets; each draws one t' per t in T log-uniformly from
/// [t/10, 10 t], measures run(t') and averages |tau - run_S(t')| / tau.
ValidationReport validate(SimulatorAdapter& adapter, const PredictionModel& model,
                          std::span<const double> t_values, int sets, std::uint64_t seed);

// ---------------------------------------------------------------------------

struct TrainOptions {
  double epsilon = 1e-2;
  int repetitions = 5;
  std::uint64_t seed = 42;
};

struct TrainResult {
  ProbeResult probe;
  TrainingCampaign campaign;
  std::vector<TimedSample> samples;
  PredictionModel model;
};

/// Probe, build the training campaign, collect samples, fit.
TrainResult train(SimulatorAdapter& adapter, const TrainOptions& options);

}  // namespace simcamp
