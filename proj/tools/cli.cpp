#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "simcamp/campaign_gen.hpp"
#include "simcamp/campaign_vm.hpp"
#include "simcamp/dataset_gen.hpp"
#include "simcamp/estimator.hpp"
#include "simcamp/external_sort.hpp"
#include "simcamp/labelling.hpp"
#include "simcamp/sim_adapter.hpp"
#include "simcamp/trace_model.hpp"

namespace simcamp::cli {

namespace {

struct Io {
  std::istream& in;
  std::ostream& out;
  std::ostream& err;
};

std::string num(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

// Returns an exit code if the tool should stop here (help or usage error).
std::optional<int> parse(CLI::App& app, const std::vector<std::string>& args, Io& io) {
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    io.out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    io.err << app.get_name() << ": " << e.what() << "\n" << app.help();
    return kExitUsage;
  }
  return std::nullopt;
}

SortBudget budget_of(std::size_t bytes) {
  SortBudget b;
  b.buffer_bytes = bytes;
  b.temp_dir = default_temp_dir();
  return b;
}

// Campaign text from a file, or from the tool's standard input for "-".
class CampaignSource {
 public:
  CampaignSource(const std::string& path, std::istream& stdin_stream) {
    if (path.empty() || path == "-") {
      stream_ = &stdin_stream;
      return;
    }
    file_.open(path);
    if (!file_) throw IoError(path + ": cannot open");
    stream_ = &file_;
  }
  std::istream& get() { return *stream_; }

 private:
  std::ifstream file_;
  std::istream* stream_ = nullptr;
};

// ---------------------------------------------------------------------------
// Pipeline tools

int dt_sort(const std::vector<std::string>& args, Io& io) {
  CLI::App app{"Sorts a file of disturbance traces lexicographically with a fixed RAM budget.", "dt-sort"};
  std::string input, output;
  std::size_t horizon = 0, buffer = 0;
  bool unique = false;
  app.add_option("input", input, "DT file to sort")->required();
  app.add_option("H", horizon, "horizon (u64 words per trace)")->required();
  app.add_option("B", buffer, "buffer size in bytes")->required();
  app.add_option("output", output, "sorted DT file")->required();
  app.add_flag("--unique", unique, "drop duplicate traces");
  if (auto rc = parse(app, args, io)) return *rc;
  sort_file(input, horizon, budget_of(buffer), unique, output);
  return kExitOk;
}

int dt_merge(const std::vector<std::string>& args, Io& io) {
  CLI::App app{"Merges two files of lex-ordered disturbance traces.", "dt-merge"};
  std::string a, b, output;
  std::size_t horizon = 0, buffer = 0;
  bool unique = false;
  app.add_option("first", a, "first sorted DT file")->required();
  app.add_option("second", b, "second sorted DT file")->required();
  app.add_option("H", horizon, "horizon")->required();
  app.add_option("B", buffer, "buffer size in bytes")->required();
  app.add_option("output", output, "merged DT file")->required();
  app.add_flag("--unique", unique, "drop duplicate traces");
  if (auto rc = parse(app, args, io)) return *rc;
  const SortBudget budget = budget_of(buffer);
  check_budget(budget, horizon);
  merge_pair(a, b, horizon, budget, unique, output);
  return kExitOk;
}

int dt_label(const std::vector<std::string>& args, Io& io) {
  CLI::App app{"Computes the load label of every trace of a sorted unique DT file.", "dt-label"};
  std::string input, output;
  std::size_t horizon = 0, buffer = 0;
  app.add_option("input", input, "sorted unique DT file")->required();
  app.add_option("H", horizon, "horizon")->required();
  app.add_option("B", buffer, "buffer size in bytes")->required();
  app.add_option("output", output, "load-label file (u64 per trace)")->required();
  bool trusted = false;
  app.add_flag("--no-check", trusted, "skip the sorted-and-unique integrity check");
  if (auto rc = parse(app, args, io)) return *rc;
  compute_load_labels(input, horizon, buffer, output, !trusted);
  return kExitOk;
}

int dt_optimise(const std::vector<std::string>& args, Io& io) {
  CLI::App app{"Prints the optimised simulation campaign on standard output.", "dt-optimise"};
  std::string dataset, loads, stores;
  std::size_t horizon = 0, buffer = 0;
  app.add_option("dataset", dataset, "sorted unique DT file")->required();
  app.add_option("LL", loads, "load-label file")->required();
  app.add_option("SL", stores, "store-label file")->required();
  app.add_option("H", horizon, "horizon")->required();
  app.add_option("B", buffer, "buffer size in bytes")->required();
  if (auto rc = parse(app, args, io)) return *rc;
  const CampaignStats s = generate_campaign(dataset, loads, stores, horizon, buffer, io.out);
  CompressionStats c{s.traces * s.horizon, s.sim_intervals};
  io.err << "traces=" << s.traces << " horizon=" << s.horizon << " lines=" << s.lines
         << " sim_d=" << c.sim_d << " sim_c=" << c.sim_c << " ratio=" << c.ratio_text()
         << " loads=" << s.loads << " stores=" << s.stores << " frees=" << s.frees
         << " injects=" << s.injects << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Campaign plumbing

int campaign_verify(const std::vector<std::string>& args, Io& io) {
  CLI::App app{"Replays a campaign and checks it against its sorted dataset.", "campaign-verify"};
  std::string dataset, campaign;
  std::size_t horizon = 0;
  VerifyOptions options;
  app.add_option("dataset", dataset, "sorted unique DT file")->required();
  app.add_option("campaign", campaign, "campaign text file, or - for standard input")->required();
  app.add_option("H", horizon, "horizon")->required();
  app.add_option("--trie-limit", options.trie_limit, "largest N*H checked with an explicit prefix trie")
      ->capture_default_str();
  app.add_option("--buffer", options.buffer_bytes, "read buffer in bytes")->capture_default_str();
  if (auto rc = parse(app, args, io)) return *rc;
  CampaignSource source(campaign, io.in);
  const VerifyReport report = verify(dataset, source.get(), horizon, options);
  io.err << report.text();
  io.out << report.summary() << "\n";
  return report.ok() ? kExitOk : kExitData;
}

int campaign_stats_tool(const std::vector<std::string>& args, Io& io) {
  CLI::App app{"Prints SIM(D), SIM(C) and the compression ratio of a campaign read from standard input.",
               "campaign-stats"};
  std::string dataset, campaign = "-";
  std::size_t horizon = 0;
  app.add_option("dataset", dataset, "DT file the campaign was generated from")->required();
  app.add_option("H", horizon, "horizon")->required();
  app.add_option("--campaign", campaign, "campaign text file instead of standard input");
  if (auto rc = parse(app, args, io)) return *rc;
  const std::uint64_t traces = count_records(dataset, horizon);
  CampaignSource source(campaign, io.in);
  const CompressionStats s = campaign_stats(traces, horizon, source.get());
  io.out << "traces=" << traces << " horizon=" << horizon << " sim_d=" << s.sim_d
         << " sim_c=" << s.sim_c << " ratio=" << s.ratio_text() << "\n";
  return kExitOk;
}

int gen_dataset(const std::vector<std::string>& args, Io& io) {
  CLI::App app{"Writes a seeded random DT file.", "gen-dataset"};
  app.set_help_flag("--help", "Print this help message and exit");  // frees -h for --h
  DatasetSpec spec;
  std::string output, skew = "zipf";
  std::size_t buffer = 1 << 20;
  app.add_option("output", output, "DT file to write")->required();
  app.add_option("--n", spec.traces, "number of traces")->capture_default_str();
  app.add_option("--h", spec.horizon, "horizon")->capture_default_str();
  app.add_option("--kinds", spec.kinds, "disturbance codes 1..kinds")->capture_default_str();
  app.add_option("--density", spec.density, "probability of a non-zero interval")->capture_default_str();
  app.add_option("--skew", skew, "prefix skew: zipf or uniform")->capture_default_str();
  app.add_option("--templates", spec.templates, "zipf template pool size")->capture_default_str();
  app.add_option("--zipf-exponent", spec.zipf_exponent, "zipf exponent")->capture_default_str();
  app.add_option("--seed", spec.seed, "random seed")->capture_default_str();
  app.add_option("--buffer", buffer, "write buffer in bytes")->capture_default_str();
  if (auto rc = parse(app, args, io)) return *rc;
  spec.skew = parse_skew(skew);
  write_dataset(spec, output, buffer);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Estimator tools

struct AdapterOptions {
  std::string config;
  std::string recorded;
  std::string record;
  std::optional<double> noise;
  std::optional<std::uint64_t> seed;

  void add(CLI::App& app) {
    app.add_option("--config", config, "synthetic backend config (key = value lines)");
    app.add_option("--recorded", recorded, "replay timings recorded earlier")->excludes("--config");
    app.add_option("--record", record, "append every timing answer to this file");
    app.add_option("--noise", noise, "synthetic multiplicative lognormal noise sigma");
    app.add_option("--adapter-seed", seed, "synthetic noise seed");
  }
};

class AdapterStack {
 public:
  explicit AdapterStack(const AdapterOptions& o) {
    SimulationSetting setting;
    if (!o.recorded.empty()) {
      base_ = std::make_unique<RecordedAdapter>(RecordedAdapter::from_file(o.recorded, setting));
    } else {
      SyntheticParams params;
      if (!o.config.empty()) load_synthetic_config(o.config, params, setting);
      if (o.noise) params.set("noise", num(*o.noise));
      if (o.seed) params.seed = *o.seed;
      base_ = std::make_unique<SyntheticAdapter>(params, setting);
    }
    if (!o.record.empty()) {
      log_.open(o.record, std::ios::app);
      if (!log_) throw IoError(o.record + ": cannot open");
      recording_ = std::make_unique<RecordingAdapter>(*base_, log_);
    }
  }
  SimulatorAdapter& get() { return recording_ ? *recording_ : *base_; }

 private:
  std::unique_ptr<SimulatorAdapter> base_;
  std::ofstream log_;
  std::unique_ptr<RecordingAdapter> recording_;
};

PredictionModel read_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open");
  try {
    return load_model(in);
  } catch (const EstimatorError& e) {
    throw EstimatorError(path + ": " + e.what());
  }
}

int est_probe(const std::vector<std::string>& args, Io& io) {
  CLI::App app{"Finds t_min and t_max from integration-step counts and prints the sampling grid.",
               "est-probe"};
  AdapterOptions adapter;
  double epsilon = 1e-2;
  adapter.add(app);
  app.add_option("--epsilon", epsilon, "linearity tolerance")->capture_default_str();
  if (auto rc = parse(app, args, io)) return *rc;
  AdapterStack stack(adapter);
  const ProbeResult r = probe(stack.get(), epsilon);
  io.out << "t_min " << num(r.t_min) << "\n"
         << "t_max " << num(r.t_max) << "\n"
         << "epsilon " << num(r.epsilon) << "\n"
         << "t_count " << r.t_values.size() << "\n"
         << "t_values";
  for (double t : r.t_values) io.out << ' ' << num(t);
  io.out << "\n";
  return kExitOk;
}

int est_train(const std::vector<std::string>& args, Io& io) {
  CLI::App app{"Trains the execution-time model and writes it as text.", "est-train"};
  AdapterOptions adapter;
  TrainOptions options;
  std::string output;
  std::string campaign_out;
  adapter.add(app);
  app.add_option("output", output, "model file, or - for standard output")->required();
  app.add_option("--epsilon", options.epsilon, "linearity tolerance")->capture_default_str();
  app.add_option("--reps", options.repetitions, "executions of the training campaign")->capture_default_str();
  app.add_option("--seed", options.seed, "seed recorded in the model")->capture_default_str();
  app.add_option("--campaign-out", campaign_out, "also write the training campaign here");
  if (auto rc = parse(app, args, io)) return *rc;
  AdapterStack stack(adapter);
  const TrainResult r = train(stack.get(), options);
  if (output == "-") {
    save_model(r.model, io.out);
  } else {
    std::ofstream out(output);
    if (!out) throw IoError(output + ": cannot open");
    save_model(r.model, out);
  }
  if (!campaign_out.empty()) {
    std::ofstream out(campaign_out);
    if (!out) throw IoError(campaign_out + ": cannot open");
    out << render_campaign(r.campaign.campaign);
  }
  io.err << "t_min=" << num(r.probe.t_min) << " t_max=" << num(r.probe.t_max)
         << " t_count=" << r.probe.t_values.size() << " samples=" << r.samples.size()
         << " alpha=" << num(r.model.alpha) << " beta=" << num(r.model.beta)
         << " gamma=" << num(r.model.gamma) << " err=" << num(r.model.err) << "\n";
  return kExitOk;
}

int est_predict(const std::vector<std::string>& args, Io& io) {
  CLI::App app{"Predicts the execution time in seconds of a campaign read from standard input.",
               "est-predict"};
  std::string model_path, campaign = "-";
  double tau = 1.0;
  app.add_option("model", model_path, "model file from est-train")->required();
  app.add_option("--tau", tau, "simulated seconds per interval")->capture_default_str();
  app.add_option("--campaign", campaign, "campaign text file instead of standard input");
  if (auto rc = parse(app, args, io)) return *rc;
  const PredictionModel model = read_model(model_path);
  CampaignSource source(campaign, io.in);
  io.out << num(predict_campaign(model, source.get(), tau)) << "\n";
  return kExitOk;
}

int est_validate(const std::vector<std::string>& args, Io& io) {
  CLI::App app{"Measures the model's run-cost error on random validation sets.", "est-validate"};
  AdapterOptions adapter;
  std::string model_path;
  int sets = 100;
  std::uint64_t seed = 42;
  adapter.add(app);
  app.add_option("model", model_path, "model file from est-train")->required();
  app.add_option("--sets", sets, "number of validation sets")->capture_default_str();
  app.add_option("--seed", seed, "validation draw seed")->capture_default_str();
  if (auto rc = parse(app, args, io)) return *rc;
  const PredictionModel model = read_model(model_path);
  AdapterStack stack(adapter);
  const std::vector<double> grid = build_T(model.t_min, model.t_max);
  const ValidationReport r = validate(stack.get(), model, grid, sets, seed);
  io.out << "sets " << r.set_errors.size() << "\n"
         << "mean " << num(r.mean) << "\n"
         << "min " << num(r.min) << "\n"
         << "max " << num(r.max) << "\n"
         << "stddev " << num(r.stddev) << "\n"
         << "histogram";
  for (std::size_t k = 0; k < r.histogram.size(); ++k) {
    io.out << ' ' << (k + 1 == r.histogram.size() ? ">=" + std::to_string(k) : std::to_string(k)) << "%:"
           << r.histogram[k];
  }
  io.out << "\n";
  return kExitOk;
}

using ToolFn = int (*)(const std::vector<std::string>&, Io&);

const std::vector<std::pair<std::string, ToolFn>>& registry() {
  static const std::vector<std::pair<std::string, ToolFn>> tools{
      {"dt-sort", dt_sort},
      {"dt-label", dt_label},
      {"dt-optimise", dt_optimise},
      {"dt-merge", dt_merge},
      {"campaign-verify", campaign_verify},
      {"campaign-stats", campaign_stats_tool},
      {"gen-dataset", gen_dataset},
      {"est-probe", est_probe},
      {"est-train", est_train},
      {"est-predict", est_predict},
      {"est-validate", est_validate},
  };
  return tools;
}

}  // namespace

const std::vector<std::string>& tool_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, fn] : registry()) out.push_back(name);
    return out;
  }();
  return names;
}

int run_tool(std::string_view name, const std::vector<std::string>& args, std::istream& in,
             std::ostream& out, std::ostream& err) {
  const auto& tools = registry();
  auto it = std::find_if(tools.begin(), tools.end(), [&](const auto& t) { return t.first == name; });
  if (it == tools.end()) {
    err << "unknown tool '" << name << "'\n";
    return kExitUsage;
  }
  Io io{in, out, err};
  try {
    return it->second(args, io);
  } catch (const VmError& e) {
    err << name << ": campaign fault " << fault_name(e.fault()) << ": " << e.what() << "\n";
  } catch (const std::exception& e) {
    err << name << ": " << e.what() << "\n";
  }
  return kExitData;
}

}  // namespace simcamp::cli
