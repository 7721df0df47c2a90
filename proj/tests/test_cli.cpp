#include "mixcx/cli/commands.hpp"
#include "mixcx/errors.hpp"

#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace mixcx;
using namespace mixcx::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("mixcx_cli_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run(const std::string& args, const std::string& log = "") {
  std::string cmd = std::string(MIXCX_EXE) + " " + args;
  cmd += log.empty() ? " > /dev/null 2>&1" : " > " + (scratch() / log).string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

// Three windows drawn from one Gaussian.
fs::path single_gaussian_stream() {
  const fs::path out = scratch() / "single.csv";
  if (fs::exists(out)) return out;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z(0.0, 1.0);
  LabeledStream s;
  for (long long t = 1; t <= 12; ++t) {
    PointMatrix p(150, 2);
    for (Eigen::Index n = 0; n < p.rows(); ++n) p.row(n) << z(rng), z(rng);
    s.times.push_back(t);
    s.windows.emplace_back(p);
  }
  std::ofstream f(out);
  write_stream_csv(f, s);
  return out;
}

std::vector<std::vector<std::string>> table(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) rows.push_back(split_csv_line(line));
  return rows;
}

}  // namespace

TEST_CASE("generate writes the requested number of rows") {
  const fs::path out = scratch() / "move.csv";
  CHECK(run("generate move --seed 1 -T 150 -N 1000 -o " + out.string()) == 0);
  CHECK(lines(out) == 150001);
  CHECK(fs::exists(manifest_path(out)));
  const auto m = nlohmann::json::parse(slurp(manifest_path(out)));
  CHECK(m["command"] == "generate");
  CHECK(m["seed"] == 1);
  CHECK(m["version"] == kToolVersion);
  CHECK(m["config"]["spec"]["n_per_t"] == 1000);
}

TEST_CASE("generate --reversed equals the library stream") {
  const fs::path out = scratch() / "imb_rev.csv";
  CHECK(run("generate imbalance --reversed -T 20 -N 40 -o " + out.string()) == 0);
  StreamSpec spec;
  spec.t_count = 20;
  spec.n_per_t = 40;
  spec.reversed = true;
  std::ostringstream expected;
  write_stream_csv(expected, gen_imbalance_gaussian(spec));
  CHECK(slurp(out) == expected.str());
}

TEST_CASE("usage errors exit with 2") {
  CHECK(run("generate move -T 0 -o " + (scratch() / "never.csv").string()) == 2);
  CHECK(run("generate circle -o " + (scratch() / "never.csv").string()) == 2);
  CHECK(run("bogus") == 2);
  CHECK(run("experiment --seeds 1") == 2);
  const fs::path in = single_gaussian_stream();
  CHECK(run("track -i " + in.string() + " -o " + (scratch() / "x.csv").string() +
                " --criterion NML",
            "criterion.log") == 2);
  CHECK(slurp(scratch() / "criterion.log").find("AIC|AIC+comp|BIC|BIC+comp") != std::string::npos);
  CHECK(run("decompose -i " + in.string() + " -o " + (scratch() / "x.csv").string() + " -m 1") == 2);
}

TEST_CASE("data errors exit with 3") {
  CHECK(run("track -i " + (scratch() / "missing.csv").string() + " -o " +
            (scratch() / "x.csv").string()) == 3);
  const fs::path bad = scratch() / "bad_track.csv";
  std::ofstream(bad) << "t,K\n1,2\n";
  CHECK(run("eval -i " + bad.string()) == 3);
  CHECK_THROWS_AS(read_track_csv(bad), SchemaError);
}

TEST_CASE("track is a deterministic thin wrapper") {
  const fs::path in = single_gaussian_stream();
  const fs::path a = scratch() / "track_a.csv";
  const fs::path b = scratch() / "track_b.csv";
  const std::string flags = " --k-max 3 --restarts 2 --seed 5 --param-count standard";
  CHECK(run("track -i " + in.string() + " -o " + a.string() + flags) == 0);
  CHECK(run("track -i " + in.string() + " -o " + b.string() + flags) == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(fs::exists(plot_path(a)));
  CHECK(slurp(plot_path(a)).find("<svg") == 0);

  const TrackTable t = read_track_csv(a);
  REQUIRE(t.mc.size() == 12);
  for (double v : t.mc) CHECK(v < 0.05);

  SdmsConfig cfg;
  cfg.k_max = 3;
  cfg.param_count = ParamCount::Standard;
  cfg.fit.restarts = 2;
  cfg.fit.rng_seed = 5;
  const LabeledStream s = read_stream_csv(in);
  std::ostringstream expected;
  write_track_csv(expected, s.times, track_mc(s.windows, cfg));
  CHECK(slurp(a) == expected.str());
}

TEST_CASE("manifest replay reproduces outputs bit for bit") {
  const fs::path in = single_gaussian_stream();
  const fs::path a = scratch() / "replay_src.csv";
  CHECK(run("track -i " + in.string() + " -o " + a.string() +
            " --k-max 3 --restarts 2 --seed 9 --criterion AIC+comp") == 0);
  const fs::path b = scratch() / "replay_dst.csv";
  CHECK(run("replay " + manifest_path(a).string() + " -o " + b.string()) == 0);
  CHECK(slurp(a) == slurp(b));

  const fs::path g = scratch() / "gen_src.csv";
  CHECK(run("generate move --seed 3 -T 15 -N 20 -o " + g.string()) == 0);
  const fs::path h = scratch() / "gen_dst.csv";
  CHECK(run("replay " + manifest_path(g).string() + " -o " + h.string()) == 0);
  CHECK(slurp(g) == slurp(h));

  const auto m = nlohmann::json::parse(slurp(manifest_path(a)));
  CHECK(m["config"]["sdms"]["criterion"] == "AIC+comp");
  CHECK(to_json(track_from_json(m["config"])) == m["config"]);
}

TEST_CASE("decompose at L = 1 is the identity") {
  const fs::path in = single_gaussian_stream();
  const fs::path out = scratch() / "dec1.csv";
  CHECK(run("decompose -i " + in.string() + " -o " + out.string() +
            " --k-max 3 --restarts 2 -L 1") == 0);
  const auto rows = table(out);
  REQUIRE(rows.size() == 13);
  CHECK(rows[0] == std::vector<std::string>{"t", "K", "mc_total", "mc_interaction", "W_1",
                                            "mc_component_1", "contribution_1",
                                            "additivity_residual"});
  for (std::size_t r = 1; r < rows.size(); ++r) {
    CHECK(std::abs(std::stod(rows[r][3])) <= 1e-12);
    CHECK(std::stod(rows[r][4]) == doctest::Approx(1.0));
    CHECK(std::abs(std::stod(rows[r][7])) <= 1e-9);
  }
  CHECK(fs::exists(centers_path(out)));
}

TEST_CASE("decompose additivity column on a two-cluster stream") {
  StreamSpec spec;
  spec.t_count = 10;
  spec.n_per_t = 120;
  spec.rng_seed = 2;
  const fs::path in = scratch() / "move_small.csv";
  {
    std::ofstream f(in);
    write_stream_csv(f, gen_move_gaussian(spec));
  }
  const fs::path out = scratch() / "dec2.csv";
  CHECK(run("decompose -i " + in.string() + " -o " + out.string() +
            " --k-max 4 --restarts 2 --param-count standard -L 2") == 0);
  const auto rows = table(out);
  REQUIRE(rows.size() == 11);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    CHECK(std::abs(std::stod(rows[r].back())) <= 1e-8);
  }
}

TEST_CASE("detect and eval on hand-built tracks") {
  const fs::path flat = scratch() / "flat_track.csv";
  {
    std::ofstream f(flat);
    f << "t,K,MC\n";
    for (int t = 1; t <= 150; ++t) f << t << ",2,0.5\n";
  }
  std::ostringstream report;
  EvalOptions opt;
  opt.input = flat;
  const auto results = run_eval(opt, report);
  REQUIRE(results.size() == 2);
  CHECK(results[0].delay == 50);
  CHECK(results[1].delay == 50);
  CHECK(results[0].far == 0.0);

  // MC drifts from t = 51 while K steps once at t = 90.
  const fs::path drift = scratch() / "drift_track.csv";
  std::vector<double> mc;
  std::vector<double> k;
  {
    std::ofstream f(drift);
    f << "t,K,MC,expMC,cost,flagged\n";
    for (int t = 1; t <= 150; ++t) {
      const double m = t <= 50 ? 1.0 : (t <= 100 ? 1.0 + 0.01 * (t - 50) : 1.5);
      const int kk = t < 90 ? 3 : 4;
      mc.push_back(m);
      k.push_back(kk);
      f << t << ',' << kk << ',' << m << ',' << std::exp(m) << ",0,0\n";
    }
  }
  opt.input = drift;
  opt.output = scratch() / "drift_eval.csv";
  std::ostringstream paired;
  const auto both = run_eval(opt, paired);
  AlertConfig a;
  const EvalResult direct_mc = evaluate(detect_changes(mc, a));
  a.mode = AlertMode::KSequence;
  const EvalResult direct_k = evaluate(detect_changes(k, a));
  CHECK(both[0].delay == direct_mc.delay);
  CHECK(both[1].delay == direct_k.delay);
  CHECK(both[0].alerts == direct_mc.alerts);
  CHECK(both[0].delay < both[1].delay);
  CHECK(paired.str().find("mode=mc") != std::string::npos);
  CHECK(fs::exists(opt.output));

  CHECK(run("detect -i " + drift.string() + " --mode k -o " + (scratch() / "alerts.csv").string()) == 0);
  const auto rows = table(scratch() / "alerts.csv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[1][0] == std::to_string(*direct_k.alerts.begin()));
}

TEST_CASE("experiment end to end at toy scale") {
  const fs::path dir = scratch() / "exp";
  CHECK(run("experiment --seed 1 --seeds 1 --dataset imbalance --direction forward -N 60 "
            "--k-max 5 --restarts 1 --param-count standard -o " + dir.string(),
            "exp.log") == 0);
  CHECK(fs::exists(dir / "experiment_runs.csv"));
  CHECK(fs::exists(dir / "experiment_summary.csv"));
  CHECK(lines(dir / "experiment_runs.csv") == 2);
  CHECK(slurp(scratch() / "exp.log").find("Delay(MC)") != std::string::npos);
}
