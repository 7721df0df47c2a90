#include "mixcx/cli/commands.hpp"
#include "mixcx/errors.hpp"

#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <string>
#include <vector>

namespace {

using namespace mixcx;
using namespace mixcx::cli;

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

struct SdmsFlags {
  std::string criterion = "BIC";
  std::string param_count = "compact";
  SdmsConfig config;

  void add(CLI::App& app) {
    app.add_option("--criterion", criterion, "AIC|AIC+comp|BIC|BIC+comp")->capture_default_str();
    app.add_option("--k-max", config.k_max, "largest candidate K")->capture_default_str();
    app.add_option("--beta", config.beta, "model-change probability")->capture_default_str();
    app.add_option("--param-count", param_count, "compact|standard")->capture_default_str();
    app.add_option("--seed", config.fit.rng_seed, "EM seed")->capture_default_str();
    app.add_option("--restarts", config.fit.restarts, "EM restarts")->capture_default_str();
    app.add_option("--max-iter", config.fit.max_iterations, "EM iteration cap")->capture_default_str();
    app.add_option("--tol", config.fit.log_likelihood_tolerance, "EM stopping tolerance")
        ->capture_default_str();
    app.add_option("--reg", config.fit.regularization, "covariance ridge")->capture_default_str();
    app.add_option("--threads", config.fit.threads, "restart threads (0 = all cores)")
        ->capture_default_str();
  }

  SdmsConfig resolve() const {
    SdmsConfig c = config;
    c.criterion = parse_criterion(criterion);
    c.param_count = parse_param_count(param_count);
    return c;
  }
};

void add_spec_flags(CLI::App& app, StreamSpec& spec) {
  app.add_option("-T,--windows", spec.t_count, "number of windows")->capture_default_str();
  app.add_option("-N,--points", spec.n_per_t, "points per window")->capture_default_str();
  app.add_option("-d,--dimension", spec.dimension, "dimension")->capture_default_str();
}

void add_alert_flags(CLI::App& app, AlertConfig& alert) {
  app.add_option("--window", alert.window, "median window w")->capture_default_str();
  app.add_option("--threshold", alert.mc_threshold, "MC change threshold")->capture_default_str();
  app.add_option("--min-gap", alert.min_gap, "minimum distance between alerts")
      ->capture_default_str();
  app.add_option("--start", alert.start_t, "first scanned timestep")->capture_default_str();
}

void add_eval_flags(CLI::App& app, EvalConfig& eval) {
  app.add_option("--transaction-begin", eval.transaction_begin)->capture_default_str();
  app.add_option("--transaction-end", eval.transaction_end)->capture_default_str();
  app.add_option("--horizon-begin", eval.horizon_begin)->capture_default_str();
  app.add_option("--horizon-end", eval.horizon_end)->capture_default_str();
  app.add_option("--delay-cap", eval.delay_cap)->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixture complexity tracking and clustering-change detection"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  // Each subcommand fills `prepare` (option resolution, usage errors) and `run`.
  std::function<void()> prepare;
  std::function<void()> run;

  GenerateOptions gen;
  std::string gen_dataset;
  auto* generate = app.add_subcommand("generate", "write a synthetic stream CSV");
  generate->add_option("dataset", gen_dataset, "move|imbalance")->required();
  generate->add_option("--seed", gen.spec.rng_seed)->capture_default_str();
  add_spec_flags(*generate, gen.spec);
  generate->add_flag("--reversed", gen.spec.reversed, "replay windows T..1");
  generate->add_option("-o,--output", gen.output)->required();
  generate->callback([&] {
    prepare = [&] {
      gen.dataset = parse_dataset(gen_dataset);
      gen.validate();
    };
    run = [&] { run_generate(gen); };
  });

  TrackOptions track;
  SdmsFlags track_sdms;
  auto* track_cmd = app.add_subcommand("track", "SDMS over a stream; writes t,K,MC,expMC,cost");
  track_cmd->add_option("-i,--input", track.input)->required();
  track_cmd->add_option("-o,--output", track.output)->required();
  track_sdms.add(*track_cmd);
  track_cmd->callback([&] {
    prepare = [&] {
      track.sdms = track_sdms.resolve();
      track.validate();
    };
    run = [&] { run_track(track); };
  });

  DecomposeOptions dec;
  SdmsFlags dec_sdms;
  auto* decompose = app.add_subcommand("decompose", "SDMS plus hierarchical MC decomposition");
  decompose->add_option("-i,--input", dec.input)->required();
  decompose->add_option("-o,--output", dec.output)->required();
  dec_sdms.add(*decompose);
  decompose->add_option("-L,--upper", dec.fcm.l, "number of upper components")
      ->capture_default_str();
  decompose->add_option("-m,--fuzziness", dec.fcm.m, "fuzzy c-means exponent")
      ->capture_default_str();
  decompose->add_option("--fcm-max-iter", dec.fcm.max_iterations)->capture_default_str();
  decompose->add_option("--fcm-tol", dec.fcm.tolerance)->capture_default_str();
  decompose->callback([&] {
    prepare = [&] {
      dec.sdms = dec_sdms.resolve();
      dec.fcm.rng_seed = dec.sdms.fit.rng_seed;
      dec.validate();
    };
    run = [&] { run_decompose(dec); };
  });

  DetectOptions det;
  std::string det_mode = "mc";
  auto* detect = app.add_subcommand("detect", "raise alerts from a track CSV");
  detect->add_option("-i,--input", det.input)->required();
  detect->add_option("-o,--output", det.output, "alerts CSV (optional)");
  detect->add_option("--mode", det_mode, "mc|k")->capture_default_str();
  add_alert_flags(*detect, det.alert);
  detect->callback([&] {
    prepare = [&] {
      det.alert.mode = parse_alert_mode(det_mode);
      det.validate();
    };
    run = [&] { run_detect(det, std::cout); };
  });

  EvalOptions ev;
  std::vector<std::string> ev_modes{"mc", "k"};
  auto* eval = app.add_subcommand("eval", "Delay/FAR of alerts from a track CSV");
  eval->add_option("-i,--input", ev.input)->required();
  eval->add_option("-o,--output", ev.output, "report CSV (optional)");
  eval->add_option("--mode", ev_modes, "mc and/or k")->capture_default_str();
  add_alert_flags(*eval, ev.alert);
  add_eval_flags(*eval, ev.eval);
  eval->callback([&] {
    prepare = [&] {
      ev.modes.clear();
      for (const auto& m : ev_modes) ev.modes.push_back(parse_alert_mode(m));
      ev.eval.window = ev.alert.window;
      ev.validate();
    };
    run = [&] { run_eval(ev, std::cout); };
  });

  ExperimentOptions ex;
  SdmsFlags ex_sdms;
  std::vector<std::string> ex_datasets{"move", "imbalance"};
  std::vector<std::string> ex_directions{"forward", "reverse"};
  std::vector<std::string> ex_criteria{"BIC"};
  auto* experiment = app.add_subcommand("experiment", "averaged Delay/FAR over seeded trials");
  experiment->add_option("--seed", ex.seed, "first seed")->required();
  experiment->add_option("--seeds", ex.seeds, "number of seeds")->capture_default_str();
  experiment->add_option("--dataset", ex_datasets, "move and/or imbalance")->capture_default_str();
  experiment->add_option("--direction", ex_directions, "forward and/or reverse")
      ->capture_default_str();
  experiment->add_option("--criterion", ex_criteria, "AIC|AIC+comp|BIC|BIC+comp")
      ->capture_default_str();
  add_spec_flags(*experiment, ex.spec);
  experiment->add_option("--k-max", ex.sdms.k_max)->capture_default_str();
  experiment->add_option("--beta", ex.sdms.beta)->capture_default_str();
  experiment->add_option("--param-count", ex_sdms.param_count, "compact|standard")
      ->capture_default_str();
  experiment->add_option("--restarts", ex.sdms.fit.restarts)->capture_default_str();
  experiment->add_option("--max-iter", ex.sdms.fit.max_iterations)->capture_default_str();
  experiment->add_option("--tol", ex.sdms.fit.log_likelihood_tolerance)->capture_default_str();
  experiment->add_option("--reg", ex.sdms.fit.regularization)->capture_default_str();
  add_alert_flags(*experiment, ex.alert);
  experiment->add_option("--threads", ex.threads, "concurrent trials (0 = all cores)")
      ->capture_default_str();
  experiment->add_option("-o,--output", ex.output, "directory for runs/summary CSVs");
  experiment->callback([&] {
    prepare = [&] {
      ex.datasets.clear();
      for (const auto& d : ex_datasets) ex.datasets.push_back(parse_dataset(d));
      ex.directions.clear();
      for (const auto& d : ex_directions) {
        if (d != "forward" && d != "reverse") {
          throw InvalidInputError("unknown direction '" + d + "' (expected forward|reverse)");
        }
        ex.directions.push_back(d == "reverse");
      }
      ex.criteria.clear();
      for (const auto& c : ex_criteria) ex.criteria.push_back(parse_criterion(c));
      ex.sdms.param_count = parse_param_count(ex_sdms.param_count);
      ex.eval.window = ex.alert.window;
      ex.validate();
    };
    run = [&] { run_experiment(ex, std::cout); };
  });

  std::string manifest;
  std::string replay_output;
  auto* replay_cmd = app.add_subcommand("replay", "re-run the command recorded in a manifest");
  replay_cmd->add_option("manifest", manifest)->required();
  replay_cmd->add_option("-o,--output", replay_output, "redirect the primary output");
  replay_cmd->callback([&] {
    prepare = [] {};
    run = [&] { replay(manifest, replay_output, std::cout); };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    prepare();
  } catch (const mixcx::Error& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    run();
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return 0;
}
