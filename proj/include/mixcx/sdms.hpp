#pragma once

#include "mixcx/em.hpp"
#include "mixcx/mixture.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace mixcx {

/// Sequential dynamic model selection settings.
struct SdmsConfig {
  std::size_t k_max = 10;
  double beta = 0.01;
  Criterion criterion = Criterion::BicObserved;
  ParamCount param_count = ParamCount::Compact;
  FitConfig fit;

  void validate() const;
};

/// -log p(K_t | K_{t-1}, beta); `k_prev` is empty at the first timestep,
/// where the code length is log k_max.
double change_code_length(std::size_t k_t, std::optional<std::size_t> k_prev,
                          const SdmsConfig& config);

/// {1..k_max} at the first step, otherwise {k_prev-1, k_prev, k_prev+1} clipped.
std::vector<std::size_t> candidate_sizes(std::optional<std::size_t> k_prev,
                                         const SdmsConfig& config);

struct SdmsStep {
  std::size_t selected_k = 0;
  FittedModel fitted;
  // Criterion score of `fitted` plus the change code length.
  double total_cost = 0.0;
  double change_cost = 0.0;
};

/// Fits every candidate size and keeps the cheapest; ties go to the smaller K.
/// `timestep` (1-based) only selects the RNG substream.
/// Throws StepFailureError when every candidate fit fails.
SdmsStep sdms_step(const WeightedDataset& data, std::optional<std::size_t> k_prev,
                   const SdmsConfig& config, std::size_t timestep = 1);

struct TrackPoint {
  std::size_t selected_k = 0;
  FittedModel fitted;
  double mc = 0.0;
  double total_cost = 0.0;
  // Every candidate fit failed; the previous model and MC were carried forward
  // and total_cost is NaN.
  bool flagged = false;
};

struct TrackResult {
  std::vector<TrackPoint> steps;

  std::vector<double> mc_sequence() const;
  std::vector<double> k_sequence() const;
};

/// Tracking MC: SDMS at each window, then MC of the selected model on that window.
TrackResult track_mc(const std::vector<WeightedDataset>& stream, const SdmsConfig& config);

}  // namespace mixcx
