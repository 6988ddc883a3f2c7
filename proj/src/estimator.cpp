#include "simcamp/estimator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace simcamp {

namespace {

// j * 10^e, correctly rounded.
double scaled_decade(int j, int e) {
  const std::string text = std::to_string(j) + "e" + std::to_string(e);
  return std::strtod(text.c_str(), nullptr);
}

std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace

double pow10(int exponent) { return scaled_decade(1, exponent); }

int decade_exponent(double t) {
  if (!(t > 0) || !std::isfinite(t)) throw EstimatorError("not a power of ten: " + format_double(t));
  const int e = static_cast<int>(std::lround(std::log10(t)));
  if (std::abs(t - pow10(e)) > 1e-12 * t) {
    throw EstimatorError("not a power of ten: " + format_double(t));
  }
  return e;
}

// ---------------------------------------------------------------------------

double find_t_min(SimulatorAdapter& adapter, int floor_exponent) {
  std::uint64_t previous = adapter.step_count(pow10(0));
  for (int i = -1; i >= floor_exponent; --i) {
    const std::uint64_t current = adapter.step_count(pow10(i));
    if (current == previous) return pow10(i + 1);
    previous = current;
  }
  throw EstimatorError("no constant regime found down to 10^" + std::to_string(floor_exponent));
}

double find_t_max(SimulatorAdapter& adapter, double t_min, double epsilon, int max_iterations) {
  if (!(epsilon > 0)) throw EstimatorError("epsilon must be positive");
  const int a = decade_exponent(t_min);
  std::vector<double> ts, ns;
  for (int i = 1; i <= max_iterations; ++i) {
    const double t = pow10(a + i - 1);
    const double n = static_cast<double>(adapter.step_count(t));
    if (i >= 3) {
      const double k = static_cast<double>(ts.size());
      const double t_mean = std::accumulate(ts.begin(), ts.end(), 0.0) / k;
      const double n_mean = std::accumulate(ns.begin(), ns.end(), 0.0) / k;
      double sxy = 0, sxx = 0;
      for (std::size_t j = 0; j < ts.size(); ++j) {
        sxy += (ts[j] - t_mean) * (ns[j] - n_mean);
        sxx += (ts[j] - t_mean) * (ts[j] - t_mean);
      }
      const double slope = sxy / sxx;
      const double predicted = n_mean + slope * (t - t_mean);
      if (predicted > 0 && std::abs(n / predicted - 1.0) < epsilon) return t;
    }
    ts.push_back(t);
    ns.push_back(n);
  }
  throw EstimatorError("no linear regime found within " + std::to_string(max_iterations) +
                       " decades above t_min");
}

std::vector<double> build_T(double t_min, double t_max) {
  const int a = decade_exponent(t_min);
  const int b = decade_exponent(t_max);
  if (a >= b) throw EstimatorError("t_min must be below t_max");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(9 * (b - a) + 1));
  for (int i = a; i < b; ++i) {
    for (int j = 1; j <= 9; ++j) out.push_back(scaled_decade(j, i));
  }
  out.push_back(pow10(b));
  return out;
}

ProbeResult probe(SimulatorAdapter& adapter, double epsilon) {
  ProbeResult r;
  r.epsilon = epsilon;
  r.t_min = find_t_min(adapter);
  r.t_max = find_t_max(adapter, r.t_min, epsilon);
  r.t_values = build_T(r.t_min, r.t_max);
  return r;
}

// ---------------------------------------------------------------------------

TrainingCampaign build_training_campaign(std::span<const double> t_values,
                                         std::span<const Disturbance> disturbances) {
  if (t_values.empty()) throw EstimatorError("no t-values to sample");
  if (disturbances.empty()) throw EstimatorError("no disturbances to inject");
  TrainingCampaign out;
  out.time_unit = *std::min_element(t_values.begin(), t_values.end());
  if (!(out.time_unit > 0)) throw EstimatorError("t-values must be positive");

  std::vector<std::uint64_t> units;
  for (double t : t_values) {
    const double u = std::round(t / out.time_unit);
    if (std::abs(u * out.time_unit - t) > 1e-9 * t) {
      throw EstimatorError("t-value " + format_double(t) + " is not a multiple of " +
                           format_double(out.time_unit));
    }
    units.push_back(static_cast<std::uint64_t>(u));
  }

  const std::size_t n = units.size();
  auto& lines = out.campaign.lines;
  for (std::size_t k = 1; k <= n; ++k) {
    CommandLine line;
    if (k >= 3) line.push_back(SimCommand::free(k - 2));
    line.push_back(SimCommand::load(k - 1));
    if (k <= disturbances.size()) line.push_back(SimCommand::inject(disturbances[k - 1]));
    line.push_back(SimCommand::run(units[k - 1]));
    line.push_back(SimCommand::store(k));
    lines.push_back(std::move(line));
  }
  {
    CommandLine line;
    if (n >= 2) line.push_back(SimCommand::free(n - 1));
    line.push_back(SimCommand::load(n));
    line.push_back(SimCommand::run(units[0]));
    lines.push_back(std::move(line));
  }
  for (std::size_t m = n + 1; m <= disturbances.size(); ++m) {
    lines.push_back({SimCommand::load(0), SimCommand::inject(disturbances[m - 1]), SimCommand::run(units[0])});
  }
  lines.push_back({SimCommand::free(n)});
  return out;
}

std::vector<TimedSample> collect_samples(SimulatorAdapter& adapter, const TrainingCampaign& campaign,
                                         int repetitions) {
  if (repetitions < 1) throw EstimatorError("repetitions must be at least 1");
  std::vector<TimedSample> out;
  for (int r = 0; r < repetitions; ++r) {
    for (const auto& line : campaign.campaign.lines) {
      for (const auto& cmd : line) {
        TimedSample s{cmd.kind, 0.0, 0.0};
        if (cmd.kind == CommandKind::Run) s.t = static_cast<double>(cmd.arg) * campaign.time_unit;
        s.elapsed = adapter.execute(cmd, campaign.time_unit);
        if (!(s.elapsed > 0)) throw AdapterError("non-positive elapsed time from the simulator");
        out.push_back(s);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

double relative_rmse(std::span<const RunSample> samples, double alpha, double beta, double gamma,
                     bool left) {
  double sum = 0;
  std::size_t count = 0;
  for (const auto& s : samples) {
    if ((s.t < gamma) != left) continue;
    const double predicted = left ? alpha : alpha + beta * (s.t - gamma);
    const double r = (s.elapsed - predicted) / s.elapsed;
    sum += r * r;
    ++count;
  }
  return count == 0 ? 0.0 : std::sqrt(sum / static_cast<double>(count));
}

// Slope minimising the right-segment relative error for a fixed alpha.
double best_beta(std::span<const RunSample> samples, double alpha, double gamma) {
  double num = 0, den = 0;
  for (const auto& s : samples) {
    if (s.t < gamma) continue;
    const double x = (s.t - gamma) / s.elapsed;
    num += x * (s.elapsed - alpha) / s.elapsed;
    den += x * x;
  }
  if (den == 0) return 0.0;
  return std::max(0.0, num / den);
}

// Intercept at gamma of the weighted least-squares line through the right
// segment (slope clamped at zero).
double right_alpha(std::span<const RunSample> samples, double gamma) {
  double s_ww = 0, s_wx = 0, s_xx = 0, s_wy = 0, s_xy = 0;
  for (const auto& s : samples) {
    if (s.t < gamma) continue;
    const double w = 1.0 / s.elapsed;  // each residual is scaled by 1/tau
    const double x = (s.t - gamma) * w;
    const double y = 1.0;               // tau / tau
    s_ww += w * w;
    s_wx += w * x;
    s_xx += x * x;
    s_wy += w * y;
    s_xy += x * y;
  }
  const double det = s_ww * s_xx - s_wx * s_wx;
  if (det > 0) {
    const double alpha = (s_wy * s_xx - s_wx * s_xy) / det;
    const double beta = (s_ww * s_xy - s_wx * s_wy) / det;
    if (beta >= 0) return alpha;
  }
  return s_wy / s_ww;
}

std::vector<double> gamma_candidates(std::span<const RunSample> samples) {
  std::vector<double> ts;
  for (const auto& s : samples) ts.push_back(s.t);
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  std::vector<double> out;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    out.push_back(ts[k]);
    if (k + 1 < ts.size()) out.push_back(std::sqrt(ts[k] * ts[k + 1]));
  }
  std::vector<double> valid;
  for (double g : out) {
    const auto left = std::lower_bound(ts.begin(), ts.end(), g) - ts.begin();
    const auto right = static_cast<std::ptrdiff_t>(ts.size()) - left;
    if (left >= 2 && right >= 2) valid.push_back(g);
  }
  return valid;
}

}  // namespace

double segment_error(std::span<const RunSample> samples, double alpha, double beta, double gamma) {
  return relative_rmse(samples, alpha, beta, gamma, true) + relative_rmse(samples, alpha, beta, gamma, false);
}

std::vector<CandidateFit> fit_candidates(std::span<const RunSample> samples) {
  std::vector<CandidateFit> out;
  for (double gamma : gamma_candidates(samples)) {
    CandidateFit c;
    c.gamma = gamma;

    double inv = 0, inv2 = 0;
    for (const auto& s : samples) {
      if (s.t >= gamma) continue;
      inv += 1.0 / s.elapsed;
      inv2 += 1.0 / (s.elapsed * s.elapsed);
    }
    c.seed_alpha = inv / inv2;
    c.seed_beta = best_beta(samples, c.seed_alpha, gamma);
    c.seed_err = segment_error(samples, c.seed_alpha, c.seed_beta, gamma);

    // The error minimised over beta is convex in alpha, and its minimiser
    // lies between the two single-segment optima.
    auto objective = [&](double a) { return segment_error(samples, a, best_beta(samples, a, gamma), gamma); };
    const double other = right_alpha(samples, gamma);
    double lo = std::min(c.seed_alpha, other);
    double hi = std::max(c.seed_alpha, other);
    lo = std::max(lo, std::numeric_limits<double>::min());
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
    double f1 = objective(x1), f2 = objective(x2);
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
      if (f1 <= f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - phi * (hi - lo);
        f1 = objective(x1);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + phi * (hi - lo);
        f2 = objective(x2);
      }
    }
    const double refined = f1 <= f2 ? x1 : x2;
    const double refined_err = std::min(f1, f2);

    if (refined_err < c.seed_err) {
      c.alpha = refined;
      c.beta = best_beta(samples, refined, gamma);
      c.err = segment_error(samples, c.alpha, c.beta, gamma);
    } else {
      c.alpha = c.seed_alpha;
      c.beta = c.seed_beta;
      c.err = c.seed_err;
    }
    out.push_back(c);
  }
  return out;
}

PredictionModel fit(std::span<const TimedSample> samples) {
  std::vector<RunSample> runs;
  std::map<CommandKind, std::pair<double, std::size_t>> sums;
  for (const auto& s : samples) {
    if (!(s.elapsed > 0)) throw EstimatorError("samples must have positive elapsed time");
    if (s.kind == CommandKind::Run) {
      runs.push_back({s.t, s.elapsed});
    } else {
      sums[s.kind].first += s.elapsed;
      sums[s.kind].second += 1;
    }
  }

  const auto candidates = fit_candidates(runs);
  if (candidates.empty()) {
    std::vector<double> ts;
    for (const auto& r : runs) ts.push_back(r.t);
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    throw EstimatorError("cannot fit run(t): " + std::to_string(ts.size()) +
                         " distinct t-values; need two on each side of a breakpoint, so the " +
                         (ts.size() < 2 ? std::string("left") : std::string("right")) +
                         " segment is too thin");
  }

  const CandidateFit* best = &candidates.front();
  for (const auto& c : candidates) {
    if (c.err < best->err - 1e-12 * std::max(1.0, best->err)) best = &c;
  }

  PredictionModel m;
  m.alpha = best->alpha;
  m.beta = best->beta;
  m.gamma = best->gamma;
  m.err = best->err;
  auto mean = [&](CommandKind k) {
    auto it = sums.find(k);
    return it == sums.end() ? 0.0 : it->second.first / static_cast<double>(it->second.second);
  };
  m.const_inject = mean(CommandKind::Inject);
  m.const_store = mean(CommandKind::Store);
  m.const_load = mean(CommandKind::Load);
  m.const_free = mean(CommandKind::Free);
  return m;
}

// ---------------------------------------------------------------------------

double run_estimate(const PredictionModel& model, double t) {
  if (t <= model.gamma) return model.alpha;
  return model.beta * (t - model.gamma) + model.alpha;
}

double predict_command(const PredictionModel& model, const SimCommand& cmd, double time_unit) {
  switch (cmd.kind) {
    case CommandKind::Run: return run_estimate(model, static_cast<double>(cmd.arg) * time_unit);
    case CommandKind::Inject: return model.const_inject;
    case CommandKind::Store: return model.const_store;
    case CommandKind::Load: return model.const_load;
    case CommandKind::Free: return model.const_free;
  }
  return 0.0;
}

double predict_campaign(const PredictionModel& model, const Campaign& campaign, double time_unit) {
  double total = 0;
  for (const auto& line : campaign.lines) {
    for (const auto& cmd : line) total += predict_command(model, cmd, time_unit);
  }
  return total;
}

double predict_campaign(const PredictionModel& model, std::istream& campaign, double time_unit) {
  CampaignReader reader(campaign);
  double total = 0;
  while (auto line = reader.next()) {
    for (const auto& cmd : *line) total += predict_command(model, cmd, time_unit);
  }
  return total;
}

void save_model(const PredictionModel& m, std::ostream& out) {
  out << "alpha " << format_double(m.alpha) << '\n'
      << "beta " << format_double(m.beta) << '\n'
      << "gamma " << format_double(m.gamma) << '\n'
      << "const_inject " << format_double(m.const_inject) << '\n'
      << "const_store " << format_double(m.const_store) << '\n'
      << "const_load " << format_double(m.const_load) << '\n'
      << "const_free " << format_double(m.const_free) << '\n'
      << "err " << format_double(m.err) << '\n'
      << "t_min " << format_double(m.t_min) << '\n'
      << "t_max " << format_double(m.t_max) << '\n'
      << "epsilon " << format_double(m.epsilon) << '\n'
      << "seed " << m.seed << '\n';
}

PredictionModel load_model(std::istream& in) {
  PredictionModel m;
  std::map<std::string, double*> fields{
      {"alpha", &m.alpha},           {"beta", &m.beta},           {"gamma", &m.gamma},
      {"const_inject", &m.const_inject}, {"const_store", &m.const_store}, {"const_load", &m.const_load},
      {"const_free", &m.const_free}, {"err", &m.err},             {"t_min", &m.t_min},
      {"t_max", &m.t_max},           {"epsilon", &m.epsilon}};
  std::map<std::string, bool> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields_in(line);
    std::string key, value, extra;
    if (!(fields_in >> key >> value) || (fields_in >> extra)) {
      throw EstimatorError("model line " + std::to_string(line_no) + ": expected '<key> <value>'");
    }
    if (key == "seed") {
      auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), m.seed);
      if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw EstimatorError("model line " + std::to_string(line_no) + ": bad seed");
      }
    } else if (auto it = fields.find(key); it != fields.end()) {
      auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), *it->second);
      if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw EstimatorError("model line " + std::to_string(line_no) + ": bad number for " + key);
      }
    } else {
      throw EstimatorError("model line " + std::to_string(line_no) + ": unknown key " + key);
    }
    seen[key] = true;
  }
  for (const char* key : {"alpha", "beta", "gamma", "const_inject", "const_store", "const_load", "const_free"}) {
    if (!seen[key]) throw EstimatorError(std::string("model is missing ") + key);
  }
  return m;
}

// ---------------------------------------------------------------------------

ValidationReport validate(SimulatorAdapter& adapter, const PredictionModel& model,
                          std::span<const double> t_values, int sets, std::uint64_t seed) {
  if (sets < 1) throw EstimatorError("need at least one validation set");
  if (t_values.empty()) throw EstimatorError("no t-values to validate");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> exponent(-1.0, 1.0);

  ValidationReport r;
  for (int k = 0; k < sets; ++k) {
    double sum = 0;
    for (double t : t_values) {
      const double drawn = t * std::pow(10.0, exponent(rng));
      const double measured = adapter.run(drawn);
      sum += std::abs(measured - run_estimate(model, drawn)) / measured;
    }
    r.set_errors.push_back(sum / static_cast<double>(t_values.size()));
  }
  const double n = static_cast<double>(r.set_errors.size());
  r.mean = std::accumulate(r.set_errors.begin(), r.set_errors.end(), 0.0) / n;
  r.min = *std::min_element(r.set_errors.begin(), r.set_errors.end());
  r.max = *std::max_element(r.set_errors.begin(), r.set_errors.end());
  double var = 0;
  for (double e : r.set_errors) var += (e - r.mean) * (e - r.mean);
  r.stddev = std::sqrt(var / n);
  r.histogram.assign(11, 0);
  for (double e : r.set_errors) {
    const auto bin = static_cast<std::size_t>(std::min(10.0, std::floor(e * 100.0)));
    ++r.histogram[bin];
  }
  return r;
}

TrainResult train(SimulatorAdapter& adapter, const TrainOptions& options) {
  TrainResult out;
  out.probe = probe(adapter, options.epsilon);
  out.campaign = build_training_campaign(out.probe.t_values, adapter.setting().disturbances);
  out.samples = collect_samples(adapter, out.campaign, options.repetitions);
  out.model = fit(out.samples);
  out.model.t_min = out.probe.t_min;
  out.model.t_max = out.probe.t_max;
  out.model.epsilon = options.epsilon;
  out.model.seed = options.seed;
  return out;
}

}  // namespace simcamp
