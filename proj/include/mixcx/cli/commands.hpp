#pragma once

#include "mixcx/data.hpp"
#include "mixcx/decomp.hpp"
#include "mixcx/detect.hpp"
#include "mixcx/sdms.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace mixcx::cli {

inline constexpr const char* kToolVersion = MIXCX_VERSION;

enum class Dataset { Move, Imbalance };
std::string_view to_string(Dataset dataset);
Dataset parse_dataset(std::string_view name);

struct GenerateOptions {
  Dataset dataset = Dataset::Move;
  StreamSpec spec;
  std::filesystem::path output;
  void validate() const;
};

struct TrackOptions {
  std::filesystem::path input;
  std::filesystem::path output;
  SdmsConfig sdms;
  void validate() const;
};

struct DecomposeOptions {
  std::filesystem::path input;
  std::filesystem::path output;
  SdmsConfig sdms;
  FuzzyCMeansConfig fcm;
  void validate() const;
};

struct DetectOptions {
  std::filesystem::path input;
  std::filesystem::path output;
  AlertConfig alert;
  void validate() const;
};

struct EvalOptions {
  std::filesystem::path input;
  std::filesystem::path output;
  std::vector<AlertMode> modes{AlertMode::McSequence, AlertMode::KSequence};
  AlertConfig alert;
  EvalConfig eval;
  void validate() const;
};

struct ExperimentOptions {
  std::uint64_t seed = 0;
  std::size_t seeds = 10;
  std::vector<Dataset> datasets{Dataset::Move, Dataset::Imbalance};
  // false = forward (t = 1..T), true = reversed.
  std::vector<bool> directions{false, true};
  std::vector<Criterion> criteria{Criterion::BicObserved};
  StreamSpec spec;
  SdmsConfig sdms;
  AlertConfig alert;
  EvalConfig eval;
  // Trials run concurrently; 0 picks the hardware count.
  int threads = 0;
  std::filesystem::path output;
  void validate() const;
};

// Sidecar file names derived from a primary output path.
std::filesystem::path manifest_path(const std::filesystem::path& output);
std::filesystem::path plot_path(const std::filesystem::path& output);
std::filesystem::path centers_path(const std::filesystem::path& output);

// Per-timestep table written by `track` and read by `detect`/`eval`.
struct TrackTable {
  std::vector<long long> t;
  std::vector<double> k;
  std::vector<double> mc;
  std::vector<double> cost;
  std::vector<bool> flagged;
};

void write_track_csv(std::ostream& out, const std::vector<long long>& times,
                     const TrackResult& track);
/// Requires columns t, K and MC; throws SchemaError otherwise.
TrackTable read_track_csv(std::istream& in);
TrackTable read_track_csv(const std::filesystem::path& path);

void write_decomposition_csv(std::ostream& out, const std::vector<long long>& times,
                             const DecompositionTrack& result);
void write_centers_csv(std::ostream& out, const std::vector<Vector>& centers);

// Command entry points. Each writes its outputs plus a JSON manifest.
void run_generate(const GenerateOptions& options);
TrackResult run_track(const TrackOptions& options);
DecompositionTrack run_decompose(const DecomposeOptions& options);
AlertSet run_detect(const DetectOptions& options, std::ostream& report);
std::vector<EvalResult> run_eval(const EvalOptions& options, std::ostream& report);

struct TrialResult {
  Dataset dataset = Dataset::Move;
  bool reversed = false;
  Criterion criterion = Criterion::BicObserved;
  std::uint64_t seed = 0;
  EvalResult mc;
  EvalResult k;
  std::size_t flagged_steps = 0;
};

/// One synthetic stream tracked with SDMS, alerts raised on both the MC and the
/// K sequences, and each alert set scored.
TrialResult run_trial(Dataset dataset, bool reversed, Criterion criterion, std::uint64_t seed,
                      const ExperimentOptions& options);

struct SummaryRow {
  Dataset dataset = Dataset::Move;
  bool reversed = false;
  Criterion criterion = Criterion::BicObserved;
  double delay_mc = 0.0;
  double far_mc = 0.0;
  double delay_k = 0.0;
  double far_k = 0.0;
};

struct ExperimentReport {
  std::vector<TrialResult> trials;
  std::vector<SummaryRow> summary;
};

/// Trials for every (dataset, direction, criterion) and seeds seed..seed+seeds-1,
/// averaged into one summary row per configuration.
ExperimentReport run_experiment(const ExperimentOptions& options, std::ostream& report);

// Manifest round trip.
nlohmann::json make_manifest(const std::string& command, const nlohmann::json& config);
void write_manifest(const std::filesystem::path& output, const std::string& command,
                    const nlohmann::json& config);
/// Re-runs the command recorded in a manifest, optionally redirecting its output.
void replay(const std::filesystem::path& manifest, const std::filesystem::path& output_override,
            std::ostream& report);

nlohmann::json to_json(const GenerateOptions& o);
nlohmann::json to_json(const TrackOptions& o);
nlohmann::json to_json(const DecomposeOptions& o);
nlohmann::json to_json(const DetectOptions& o);
nlohmann::json to_json(const EvalOptions& o);
nlohmann::json to_json(const ExperimentOptions& o);
GenerateOptions generate_from_json(const nlohmann::json& j);
TrackOptions track_from_json(const nlohmann::json& j);
DecomposeOptions decompose_from_json(const nlohmann::json& j);
DetectOptions detect_from_json(const nlohmann::json& j);
EvalOptions eval_from_json(const nlohmann::json& j);
ExperimentOptions experiment_from_json(const nlohmann::json& j);

}  // namespace mixcx::cli
