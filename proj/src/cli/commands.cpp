#include "mixcx/cli/commands.hpp"

#include "../parallel.hpp"
#include "mixcx/cli/svg.hpp"
#include "mixcx/errors.hpp"
#include "mixcx/format.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

namespace mixcx::cli {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(Dataset dataset) {
  return dataset == Dataset::Move ? "move" : "imbalance";
}

Dataset parse_dataset(std::string_view name) {
  if (name == "move") return Dataset::Move;
  if (name == "imbalance") return Dataset::Imbalance;
  throw InvalidInputError("unknown dataset '" + std::string(name) + "' (expected move|imbalance)");
}

fs::path manifest_path(const fs::path& output) {
  return fs::path(output.string() + ".manifest.json");
}

fs::path plot_path(const fs::path& output) {
  fs::path p = output;
  return p.replace_extension(".svg");
}

fs::path centers_path(const fs::path& output) {
  fs::path p = output;
  return p.replace_extension(".centers.csv");
}

void GenerateOptions::validate() const {
  spec.validate();
  if (output.empty()) throw InvalidInputError("generate: output path required");
}

void TrackOptions::validate() const {
  sdms.validate();
  if (input.empty() || output.empty()) throw InvalidInputError("track: input and output required");
}

void DecomposeOptions::validate() const {
  sdms.validate();
  fcm.validate();
  if (input.empty() || output.empty()) {
    throw InvalidInputError("decompose: input and output required");
  }
}

void DetectOptions::validate() const {
  alert.validate();
  if (input.empty()) throw InvalidInputError("detect: input required");
}

void EvalOptions::validate() const {
  alert.validate();
  eval.validate();
  if (input.empty()) throw InvalidInputError("eval: input required");
  if (modes.empty()) throw InvalidInputError("eval: at least one mode required");
}

void ExperimentOptions::validate() const {
  if (seeds < 1) throw InvalidInputError("experiment: seeds must be >= 1");
  if (datasets.empty() || directions.empty() || criteria.empty()) {
    throw InvalidInputError("experiment: empty dataset, direction or criterion list");
  }
  spec.validate();
  sdms.validate();
  alert.validate();
  eval.validate();
  if (spec.t_count < eval.horizon_end) {
    throw InvalidInputError("experiment: T must cover the evaluation horizon");
  }
}

namespace {

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_output(path);
  out << text;
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

template <typename Writer>
void write_file(const fs::path& path, Writer writer) {
  auto out = open_output(path);
  writer(out);
  out.flush();
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

json fit_json(const FitConfig& c) {
  return {{"restarts", c.restarts},
          {"max_iterations", c.max_iterations},
          {"log_likelihood_tolerance", c.log_likelihood_tolerance},
          {"regularization", c.regularization},
          {"rng_seed", c.rng_seed},
          {"threads", c.threads}};
}

FitConfig fit_from(const json& j) {
  FitConfig c;
  c.restarts = j.at("restarts").get<int>();
  c.max_iterations = j.at("max_iterations").get<int>();
  c.log_likelihood_tolerance = j.at("log_likelihood_tolerance").get<double>();
  c.regularization = j.at("regularization").get<double>();
  c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  c.threads = j.value("threads", 1);
  return c;
}

json sdms_json(const SdmsConfig& c) {
  return {{"k_max", c.k_max},
          {"beta", c.beta},
          {"criterion", std::string(to_string(c.criterion))},
          {"param_count", std::string(to_string(c.param_count))},
          {"fit", fit_json(c.fit)}};
}

SdmsConfig sdms_from(const json& j) {
  SdmsConfig c;
  c.k_max = j.at("k_max").get<std::size_t>();
  c.beta = j.at("beta").get<double>();
  c.criterion = parse_criterion(j.at("criterion").get<std::string>());
  c.param_count = parse_param_count(j.at("param_count").get<std::string>());
  c.fit = fit_from(j.at("fit"));
  return c;
}

json spec_json(const StreamSpec& s) {
  return {{"t_count", s.t_count},
          {"n_per_t", s.n_per_t},
          {"dimension", s.dimension},
          {"rng_seed", s.rng_seed},
          {"reversed", s.reversed}};
}

StreamSpec spec_from(const json& j) {
  StreamSpec s;
  s.t_count = j.at("t_count").get<std::size_t>();
  s.n_per_t = j.at("n_per_t").get<std::size_t>();
  s.dimension = j.at("dimension").get<Eigen::Index>();
  s.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  s.reversed = j.at("reversed").get<bool>();
  return s;
}

json fcm_json(const FuzzyCMeansConfig& c) {
  return {{"l", c.l},
          {"m", c.m},
          {"max_iterations", c.max_iterations},
          {"tolerance", c.tolerance},
          {"rng_seed", c.rng_seed}};
}

FuzzyCMeansConfig fcm_from(const json& j) {
  FuzzyCMeansConfig c;
  c.l = j.at("l").get<std::size_t>();
  c.m = j.at("m").get<double>();
  c.max_iterations = j.at("max_iterations").get<int>();
  c.tolerance = j.at("tolerance").get<double>();
  c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  return c;
}

json alert_json(const AlertConfig& c) {
  return {{"window", c.window},
          {"mc_threshold", c.mc_threshold},
          {"min_gap", c.min_gap},
          {"start_t", c.start_t},
          {"mode", std::string(to_string(c.mode))}};
}

AlertConfig alert_from(const json& j) {
  AlertConfig c;
  c.window = j.at("window").get<std::size_t>();
  c.mc_threshold = j.at("mc_threshold").get<double>();
  c.min_gap = j.at("min_gap").get<std::size_t>();
  c.start_t = j.at("start_t").get<std::size_t>();
  c.mode = parse_alert_mode(j.at("mode").get<std::string>());
  return c;
}

json eval_json(const EvalConfig& c) {
  return {{"transaction_begin", c.transaction_begin},
          {"transaction_end", c.transaction_end},
          {"horizon_begin", c.horizon_begin},
          {"horizon_end", c.horizon_end},
          {"window", c.window},
          {"delay_cap", c.delay_cap}};
}

EvalConfig eval_from(const json& j) {
  EvalConfig c;
  c.transaction_begin = j.at("transaction_begin").get<std::size_t>();
  c.transaction_end = j.at("transaction_end").get<std::size_t>();
  c.horizon_begin = j.at("horizon_begin").get<std::size_t>();
  c.horizon_end = j.at("horizon_end").get<std::size_t>();
  c.window = j.at("window").get<std::size_t>();
  c.delay_cap = j.at("delay_cap").get<std::size_t>();
  return c;
}

std::string alerts_text(const AlertSet& alerts) {
  std::string out;
  for (std::size_t t : alerts) {
    if (!out.empty()) out += ';';
    out += std::to_string(t);
  }
  return out;
}

std::string direction_name(bool reversed) { return reversed ? "reverse" : "forward"; }

std::size_t column_of(const std::vector<std::string>& header, const std::string& name) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw SchemaError("track table: missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

double parse_cell(const std::string& text, std::size_t line) {
  if (text == "nan") return std::nan("");
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw ParseError("'" + text + "' is not a number", line);
    return v;
  } catch (const std::logic_error&) {
    throw ParseError("'" + text + "' is not a number", line);
  }
}

std::vector<double> sequence_for(const TrackTable& table, AlertMode mode) {
  return mode == AlertMode::McSequence ? table.mc : table.k;
}

}  // namespace

void write_track_csv(std::ostream& out, const std::vector<long long>& times,
                     const TrackResult& track) {
  if (times.size() != track.steps.size()) {
    throw InvalidInputError("track csv: time labels and steps differ in length");
  }
  out << "t,K,MC,expMC,cost,flagged\n";
  for (std::size_t i = 0; i < times.size(); ++i) {
    const auto& s = track.steps[i];
    out << times[i] << ',' << s.selected_k << ',' << format_real(s.mc) << ','
        << format_real(std::exp(s.mc)) << ',' << format_real(s.total_cost) << ','
        << (s.flagged ? 1 : 0) << '\n';
  }
}

TrackTable read_track_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    header = split_csv_line(line);
    break;
  }
  if (header.empty()) throw SchemaError("track table: empty file");
  const std::size_t t_col = column_of(header, "t");
  const std::size_t k_col = column_of(header, "K");
  const std::size_t mc_col = column_of(header, "MC");
  const auto cost_it = std::find(header.begin(), header.end(), "cost");
  const auto flag_it = std::find(header.begin(), header.end(), "flagged");
  TrackTable table;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields", line_no);
    }
    table.t.push_back(static_cast<long long>(parse_cell(fields[t_col], line_no)));
    table.k.push_back(parse_cell(fields[k_col], line_no));
    table.mc.push_back(parse_cell(fields[mc_col], line_no));
    table.cost.push_back(cost_it == header.end()
                             ? std::nan("")
                             : parse_cell(fields[static_cast<std::size_t>(cost_it - header.begin())],
                                          line_no));
    table.flagged.push_back(flag_it != header.end() &&
                            fields[static_cast<std::size_t>(flag_it - header.begin())] == "1");
  }
  return table;
}

TrackTable read_track_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return read_track_csv(in);
}

void write_decomposition_csv(std::ostream& out, const std::vector<long long>& times,
                             const DecompositionTrack& result) {
  const std::size_t l_count = result.centers.size();
  out << "t,K,mc_total,mc_interaction";
  for (std::size_t l = 1; l <= l_count; ++l) {
    out << ",W_" << l << ",mc_component_" << l << ",contribution_" << l;
  }
  out << ",additivity_residual\n";
  for (std::size_t i = 0; i < result.decompositions.size(); ++i) {
    const auto& d = result.decompositions[i];
    out << times[i] << ',' << result.track.steps[i].selected_k << ',' << format_real(d.mc_total)
        << ',' << format_real(d.mc_interaction);
    for (const auto& c : d.components) {
      out << ',' << format_real(c.weight) << ',' << format_real(c.mc) << ','
          << format_real(c.contribution);
    }
    out << ',' << format_real(d.additivity_residual()) << '\n';
  }
}

void write_centers_csv(std::ostream& out, const std::vector<Vector>& centers) {
  const Eigen::Index dim = centers.empty() ? 0 : centers.front().size();
  out << "l";
  for (Eigen::Index j = 1; j <= dim; ++j) out << ",c" << j;
  out << '\n';
  for (std::size_t l = 0; l < centers.size(); ++l) {
    out << l + 1;
    for (Eigen::Index j = 0; j < dim; ++j) out << ',' << format_real(centers[l](j));
    out << '\n';
  }
}

json to_json(const GenerateOptions& o) {
  return {{"dataset", std::string(to_string(o.dataset))},
          {"spec", spec_json(o.spec)},
          {"output", o.output.string()}};
}

json to_json(const TrackOptions& o) {
  return {{"input", o.input.string()}, {"output", o.output.string()}, {"sdms", sdms_json(o.sdms)}};
}

json to_json(const DecomposeOptions& o) {
  return {{"input", o.input.string()},
          {"output", o.output.string()},
          {"sdms", sdms_json(o.sdms)},
          {"fcm", fcm_json(o.fcm)}};
}

json to_json(const DetectOptions& o) {
  return {{"input", o.input.string()}, {"output", o.output.string()}, {"alert", alert_json(o.alert)}};
}

json to_json(const EvalOptions& o) {
  json modes = json::array();
  for (auto m : o.modes) modes.push_back(std::string(to_string(m)));
  return {{"input", o.input.string()},
          {"output", o.output.string()},
          {"modes", modes},
          {"alert", alert_json(o.alert)},
          {"eval", eval_json(o.eval)}};
}

json to_json(const ExperimentOptions& o) {
  json datasets = json::array();
  for (auto d : o.datasets) datasets.push_back(std::string(to_string(d)));
  json directions = json::array();
  for (bool r : o.directions) directions.push_back(direction_name(r));
  json criteria = json::array();
  for (auto c : o.criteria) criteria.push_back(std::string(to_string(c)));
  return {{"seed", o.seed},
          {"seeds", o.seeds},
          {"datasets", datasets},
          {"directions", directions},
          {"criteria", criteria},
          {"spec", spec_json(o.spec)},
          {"sdms", sdms_json(o.sdms)},
          {"alert", alert_json(o.alert)},
          {"eval", eval_json(o.eval)},
          {"threads", o.threads},
          {"output", o.output.string()}};
}

GenerateOptions generate_from_json(const json& j) {
  GenerateOptions o;
  o.dataset = parse_dataset(j.at("dataset").get<std::string>());
  o.spec = spec_from(j.at("spec"));
  o.output = j.at("output").get<std::string>();
  return o;
}

TrackOptions track_from_json(const json& j) {
  TrackOptions o;
  o.input = j.at("input").get<std::string>();
  o.output = j.at("output").get<std::string>();
  o.sdms = sdms_from(j.at("sdms"));
  return o;
}

DecomposeOptions decompose_from_json(const json& j) {
  DecomposeOptions o;
  o.input = j.at("input").get<std::string>();
  o.output = j.at("output").get<std::string>();
  o.sdms = sdms_from(j.at("sdms"));
  o.fcm = fcm_from(j.at("fcm"));
  return o;
}

DetectOptions detect_from_json(const json& j) {
  DetectOptions o;
  o.input = j.at("input").get<std::string>();
  o.output = j.at("output").get<std::string>();
  o.alert = alert_from(j.at("alert"));
  return o;
}

EvalOptions eval_from_json(const json& j) {
  EvalOptions o;
  o.input = j.at("input").get<std::string>();
  o.output = j.at("output").get<std::string>();
  o.modes.clear();
  for (const auto& m : j.at("modes")) o.modes.push_back(parse_alert_mode(m.get<std::string>()));
  o.alert = alert_from(j.at("alert"));
  o.eval = eval_from(j.at("eval"));
  return o;
}

ExperimentOptions experiment_from_json(const json& j) {
  ExperimentOptions o;
  o.seed = j.at("seed").get<std::uint64_t>();
  o.seeds = j.at("seeds").get<std::size_t>();
  o.datasets.clear();
  for (const auto& d : j.at("datasets")) o.datasets.push_back(parse_dataset(d.get<std::string>()));
  o.directions.clear();
  for (const auto& d : j.at("directions")) o.directions.push_back(d.get<std::string>() == "reverse");
  o.criteria.clear();
  for (const auto& c : j.at("criteria")) o.criteria.push_back(parse_criterion(c.get<std::string>()));
  o.spec = spec_from(j.at("spec"));
  o.sdms = sdms_from(j.at("sdms"));
  o.alert = alert_from(j.at("alert"));
  o.eval = eval_from(j.at("eval"));
  o.threads = j.value("threads", 0);
  o.output = j.at("output").get<std::string>();
  return o;
}

json make_manifest(const std::string& command, const json& config) {
  json seed = nullptr;
  if (config.contains("seed")) {
    seed = config["seed"];
  } else if (config.contains("sdms")) {
    seed = config["sdms"]["fit"]["rng_seed"];
  } else if (config.contains("spec")) {
    seed = config["spec"]["rng_seed"];
  }
  json inputs = json::array();
  if (config.contains("input")) inputs.push_back(config["input"]);
  json outputs = json::array();
  if (config.contains("output")) outputs.push_back(config["output"]);
  return {{"tool", "mixcx"},
          {"version", kToolVersion},
          {"command", command},
          {"seed", seed},
          {"inputs", inputs},
          {"outputs", outputs},
          {"config", config}};
}

void write_manifest(const fs::path& output, const std::string& command, const json& config) {
  write_text(manifest_path(output), make_manifest(command, config).dump(2) + "\n");
}

void run_generate(const GenerateOptions& options) {
  options.validate();
  const LabeledStream stream = options.dataset == Dataset::Move
                                   ? gen_move_gaussian(options.spec)
                                   : gen_imbalance_gaussian(options.spec);
  write_file(options.output, [&](std::ostream& out) { write_stream_csv(out, stream); });
  write_manifest(options.output, "generate", to_json(options));
}

TrackResult run_track(const TrackOptions& options) {
  options.validate();
  const LabeledStream stream = read_stream_csv(options.input);
  if (stream.empty()) throw DataError("track: input stream is empty");
  TrackResult track = track_mc(stream.windows, options.sdms);
  write_file(options.output, [&](std::ostream& out) { write_track_csv(out, stream.times, track); });

  std::vector<double> x(stream.times.begin(), stream.times.end());
  std::vector<double> exp_mc;
  for (double v : track.mc_sequence()) exp_mc.push_back(std::exp(v));
  const std::string criterion(to_string(options.sdms.criterion));
  svg::Panel mc_panel{"exp(MC), " + criterion, "exp(MC)", {{"exp(MC)", x, exp_mc, svg::palette(0), {}}}, {}};
  svg::Panel k_panel{"K, " + criterion, "K", {{"K", x, track.k_sequence(), svg::palette(1), {}}}, {}};
  write_text(plot_path(options.output), svg::render({mc_panel, k_panel}));
  write_manifest(options.output, "track", to_json(options));
  return track;
}

DecompositionTrack run_decompose(const DecomposeOptions& options) {
  options.validate();
  const LabeledStream stream = read_stream_csv(options.input);
  if (stream.empty()) throw DataError("decompose: input stream is empty");
  DecompositionTrack result = track_decomposition(stream.windows, options.sdms, options.fcm);
  write_file(options.output,
             [&](std::ostream& out) { write_decomposition_csv(out, stream.times, result); });
  write_file(centers_path(options.output),
             [&](std::ostream& out) { write_centers_csv(out, result.centers); });

  std::vector<double> x(stream.times.begin(), stream.times.end());
  std::vector<double> total;
  std::vector<double> interaction;
  const std::size_t l_count = result.centers.size();
  std::vector<std::vector<double>> w(l_count);
  std::vector<std::vector<double>> mc(l_count);
  std::vector<std::vector<double>> contribution(l_count);
  for (const auto& d : result.decompositions) {
    total.push_back(d.mc_total);
    interaction.push_back(d.mc_interaction);
    for (std::size_t l = 0; l < l_count; ++l) {
      w[l].push_back(d.components[l].weight);
      mc[l].push_back(d.components[l].mc);
      contribution[l].push_back(d.components[l].contribution);
    }
  }
  svg::Panel p_total{"MC(total) and MC(interaction)", "nats",
                     {{"total", x, total, svg::palette(0), {}},
                      {"interaction", x, interaction, svg::palette(1), {}}},
                     {}};
  svg::Panel p_w{"W(component l)", "W", {}, {}};
  svg::Panel p_mc{"MC(component l)", "nats", {}, {}};
  svg::Panel p_c{"Contribution(component l)", "nats", {}, {}};
  for (std::size_t l = 0; l < l_count; ++l) {
    const std::string label = "component " + std::to_string(l + 1);
    p_w.series.push_back({label, x, w[l], svg::palette(l), {}});
    p_mc.series.push_back({label, x, mc[l], svg::palette(l), {}});
    p_c.series.push_back({label, x, contribution[l], svg::palette(l), {}});
  }
  write_text(plot_path(options.output), svg::render({p_total, p_w, p_mc, p_c}));
  write_manifest(options.output, "decompose", to_json(options));
  return result;
}

AlertSet run_detect(const DetectOptions& options, std::ostream& report) {
  options.validate();
  const TrackTable table = read_track_csv(options.input);
  const std::vector<double> y = sequence_for(table, options.alert.mode);
  const AlertSet alerts = detect_changes(y, options.alert);
  report << "mode=" << to_string(options.alert.mode) << " alerts=" << alerts_text(alerts) << '\n';
  if (!options.output.empty()) {
    write_file(options.output, [&](std::ostream& out) {
      out << "index,t\n";
      for (std::size_t i : alerts) out << i << ',' << table.t[i - 1] << '\n';
    });
    write_manifest(options.output, "detect", to_json(options));
  }
  return alerts;
}

std::vector<EvalResult> run_eval(const EvalOptions& options, std::ostream& report) {
  options.validate();
  const TrackTable table = read_track_csv(options.input);
  std::vector<EvalResult> results;
  for (AlertMode mode : options.modes) {
    AlertConfig alert = options.alert;
    alert.mode = mode;
    const std::vector<double> y = sequence_for(table, mode);
    AlertSet alerts = detect_changes(y, alert);
    // Alerts past the horizon are outside the scoring window.
    AlertSet scored;
    for (std::size_t t : alerts) {
      if (t >= options.eval.horizon_begin && t <= options.eval.horizon_end) scored.insert(t);
    }
    results.push_back(evaluate(scored, options.eval));
    const auto& r = results.back();
    report << "mode=" << to_string(mode) << " delay=" << r.delay << " far=" << format_real(r.far)
           << " alerts=" << alerts_text(r.alerts) << '\n';
  }
  if (!options.output.empty()) {
    write_file(options.output, [&](std::ostream& out) {
      out << "mode,delay,far,false_alarms,non_accept_points,alerts\n";
      for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        out << to_string(options.modes[i]) << ',' << r.delay << ',' << format_real(r.far) << ','
            << r.false_alarms << ',' << r.non_accept_points << ',' << alerts_text(r.alerts) << '\n';
      }
    });
    write_manifest(options.output, "eval", to_json(options));
  }
  return results;
}

TrialResult run_trial(Dataset dataset, bool reversed, Criterion criterion, std::uint64_t seed,
                      const ExperimentOptions& options) {
  StreamSpec spec = options.spec;
  spec.rng_seed = seed;
  spec.reversed = reversed;
  const LabeledStream stream =
      dataset == Dataset::Move ? gen_move_gaussian(spec) : gen_imbalance_gaussian(spec);
  SdmsConfig sdms = options.sdms;
  sdms.criterion = criterion;
  sdms.fit.rng_seed = seed;
  const TrackResult track = track_mc(stream.windows, sdms);

  TrialResult trial{dataset, reversed, criterion, seed, {}, {}, 0};
  for (const auto& s : track.steps) trial.flagged_steps += s.flagged ? 1 : 0;
  auto score_mode = [&](AlertMode mode, const std::vector<double>& y) {
    AlertConfig alert = options.alert;
    alert.mode = mode;
    AlertSet scored;
    for (std::size_t t : detect_changes(y, alert)) {
      if (t >= options.eval.horizon_begin && t <= options.eval.horizon_end) scored.insert(t);
    }
    return evaluate(scored, options.eval);
  };
  trial.mc = score_mode(AlertMode::McSequence, track.mc_sequence());
  trial.k = score_mode(AlertMode::KSequence, track.k_sequence());
  return trial;
}

ExperimentReport run_experiment(const ExperimentOptions& options, std::ostream& report) {
  options.validate();
  struct Job {
    Dataset dataset;
    bool reversed;
    Criterion criterion;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (auto dataset : options.datasets) {
    for (bool reversed : options.directions) {
      for (auto criterion : options.criteria) {
        for (std::size_t s = 0; s < options.seeds; ++s) {
          jobs.push_back({dataset, reversed, criterion, options.seed + s});
        }
      }
    }
  }
  ExperimentOptions per_trial = options;
  if (detail::resolve_threads(options.threads) > 1) per_trial.sdms.fit.threads = 1;

  ExperimentReport result;
  result.trials.resize(jobs.size());
  detail::parallel_for(jobs.size(), options.threads, [&](std::size_t i) {
    const Job& j = jobs[i];
    result.trials[i] = run_trial(j.dataset, j.reversed, j.criterion, j.seed, per_trial);
  });

  for (std::size_t begin = 0; begin < result.trials.size(); begin += options.seeds) {
    const auto& first = result.trials[begin];
    SummaryRow row{first.dataset, first.reversed, first.criterion, 0, 0, 0, 0};
    for (std::size_t i = begin; i < begin + options.seeds; ++i) {
      const auto& t = result.trials[i];
      row.delay_mc += static_cast<double>(t.mc.delay);
      row.far_mc += t.mc.far;
      row.delay_k += static_cast<double>(t.k.delay);
      row.far_k += t.k.far;
    }
    const auto n = static_cast<double>(options.seeds);
    row.delay_mc /= n;
    row.far_mc /= n;
    row.delay_k /= n;
    row.far_k /= n;
    result.summary.push_back(row);
  }

  char line[256];
  std::snprintf(line, sizeof line, "%-10s %-8s %-9s %9s %9s %8s %8s %8s %8s\n", "dataset",
                "direction", "criterion", "Delay(MC)", "Delay(K)", "dDelay", "FAR(MC)", "FAR(K)",
                "dFAR");
  report << line;
  for (const auto& row : result.summary) {
    std::snprintf(line, sizeof line, "%-10s %-8s %-9s %9.1f %9.1f %8.1f %8.3f %8.3f %8.3f\n",
                  std::string(to_string(row.dataset)).c_str(), direction_name(row.reversed).c_str(),
                  std::string(to_string(row.criterion)).c_str(), row.delay_mc, row.delay_k,
                  row.delay_mc - row.delay_k, row.far_mc, row.far_k, row.far_mc - row.far_k);
    report << line;
  }

  if (!options.output.empty()) {
    const fs::path runs = options.output / "experiment_runs.csv";
    write_file(runs, [&](std::ostream& out) {
      out << "dataset,direction,criterion,seed,delay_mc,far_mc,delay_k,far_k,flagged_steps,"
             "alerts_mc,alerts_k\n";
      for (const auto& t : result.trials) {
        out << to_string(t.dataset) << ',' << direction_name(t.reversed) << ','
            << to_string(t.criterion) << ',' << t.seed << ',' << t.mc.delay << ','
            << format_real(t.mc.far) << ',' << t.k.delay << ',' << format_real(t.k.far) << ','
            << t.flagged_steps << ',' << alerts_text(t.mc.alerts) << ','
            << alerts_text(t.k.alerts) << '\n';
      }
    });
    const fs::path summary = options.output / "experiment_summary.csv";
    write_file(summary, [&](std::ostream& out) {
      out << "dataset,direction,criterion,delay_mc,far_mc,delay_k,far_k,delay_diff,far_diff\n";
      for (const auto& r : result.summary) {
        out << to_string(r.dataset) << ',' << direction_name(r.reversed) << ','
            << to_string(r.criterion) << ',' << format_real(r.delay_mc) << ','
            << format_real(r.far_mc) << ',' << format_real(r.delay_k) << ','
            << format_real(r.far_k) << ',' << format_real(r.delay_mc - r.delay_k) << ','
            << format_real(r.far_mc - r.far_k) << '\n';
      }
    });
    write_manifest(summary, "experiment", to_json(options));
  }
  return result;
}

void replay(const fs::path& manifest, const fs::path& output_override, std::ostream& report) {
  std::ifstream in(manifest);
  if (!in) throw DataError("cannot open manifest '" + manifest.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest is not valid JSON: ") + e.what(), 1);
  }
  try {
    const std::string command = j.at("command").get<std::string>();
    json config = j.at("config");
    if (!output_override.empty()) config["output"] = output_override.string();
    if (command == "generate") {
      run_generate(generate_from_json(config));
    } else if (command == "track") {
      run_track(track_from_json(config));
    } else if (command == "decompose") {
      run_decompose(decompose_from_json(config));
    } else if (command == "detect") {
      run_detect(detect_from_json(config), report);
    } else if (command == "eval") {
      run_eval(eval_from_json(config), report);
    } else if (command == "experiment") {
      run_experiment(experiment_from_json(config), report);
    } else {
      throw SchemaError("manifest: unknown command '" + command + "'");
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("manifest: ") + e.what());
  }
}

}  // namespace mixcx::cli
