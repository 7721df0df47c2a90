#pragma once

#include "mixcx/mixture.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace mixcx {

struct StreamSpec {
  std::size_t t_count = 150;
  std::size_t n_per_t = 1000;
  Eigen::Index dimension = 3;
  std::uint64_t rng_seed = 0;
  // Replay windows t = T..1.
  bool reversed = false;

  void validate() const;
};

/// A sequence of windows together with their time labels.
struct LabeledStream {
  std::vector<long long> times;
  std::vector<WeightedDataset> windows;

  std::size_t size() const noexcept { return windows.size(); }
  bool empty() const noexcept { return windows.empty(); }
};

// Move dataset: three unit-covariance clusters at x = 0, 10 and 10 + alpha(t).
double move_alpha(std::size_t t);
std::array<std::size_t, 3> move_counts(std::size_t n_per_t);
std::array<double, 3> move_centers(std::size_t t);

// Imbalance dataset: four unit-covariance clusters at x = 0, 10, 20, 30;
// alpha(t) points move from the fourth cluster to the third.
double imbalance_alpha(std::size_t t);
std::array<std::size_t, 4> imbalance_counts(std::size_t t, std::size_t n_per_t);
inline constexpr std::array<double, 4> kImbalanceCenters{0.0, 10.0, 20.0, 30.0};

/// Window at (1-based, forward) time t. Points are blocked by cluster.
WeightedDataset move_gaussian_window(const StreamSpec& spec, std::size_t t);
WeightedDataset imbalance_gaussian_window(const StreamSpec& spec, std::size_t t);

LabeledStream gen_move_gaussian(const StreamSpec& spec);
LabeledStream gen_imbalance_gaussian(const StreamSpec& spec);

struct CsvIngestOptions {
  std::size_t window_length = 14;
  std::string entity_column = "entity";
  std::string time_column = "time";
  // Empty selects every column other than entity and time.
  std::vector<std::string> feature_columns;
};

/// Long-format table `entity,time,<features...>` to a stream of sliding-window
/// sums: the window at t holds, per entity, features summed over
/// [t - window_length + 1, t]. Entities are ordered by name; entities without
/// rows in a window contribute a zero vector. Emitted t starts at
/// min_time + window_length - 1.
LabeledStream ingest_csv(std::istream& in, const CsvIngestOptions& options);
LabeledStream ingest_csv(const std::filesystem::path& path, const CsvIngestOptions& options);

/// Single-file stream serialization: header `t,x1..xd`, one row per point.
void write_stream_csv(std::ostream& out, const LabeledStream& stream);
LabeledStream read_stream_csv(std::istream& in);
LabeledStream read_stream_csv(const std::filesystem::path& path);

/// Splits one CSV record; double-quoted fields may contain commas.
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace mixcx
