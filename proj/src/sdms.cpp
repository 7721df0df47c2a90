#include "mixcx/sdms.hpp"

#include "mixcx/errors.hpp"
#include "mixcx/seeding.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace mixcx {

void SdmsConfig::validate() const {
  if (k_max < 1) throw InvalidInputError("sdms: k_max must be >= 1");
  if (!(beta > 0.0 && beta < 1.0)) throw InvalidInputError("sdms: beta must lie in (0, 1)");
  fit.validate();
}

double change_code_length(std::size_t k_t, std::optional<std::size_t> k_prev,
                          const SdmsConfig& config) {
  if (k_t < 1 || k_t > config.k_max) {
    throw InvalidInputError("change_code_length: K_t=" + std::to_string(k_t) + " outside [1, " +
                            std::to_string(config.k_max) + "]");
  }
  if (!k_prev) return std::log(static_cast<double>(config.k_max));
  if (*k_prev < 1 || *k_prev > config.k_max) {
    throw InvalidInputError("change_code_length: previous K outside [1, k_max]");
  }
  if (k_t != *k_prev) return -std::log(config.beta / 2.0);
  if (*k_prev == 1 || *k_prev == config.k_max) return -std::log(1.0 - config.beta / 2.0);
  return -std::log(1.0 - config.beta);
}

std::vector<std::size_t> candidate_sizes(std::optional<std::size_t> k_prev,
                                         const SdmsConfig& config) {
  std::vector<std::size_t> out;
  if (!k_prev) {
    for (std::size_t k = 1; k <= config.k_max; ++k) out.push_back(k);
    return out;
  }
  if (*k_prev < 1 || *k_prev > config.k_max) {
    throw InvalidInputError("candidate_sizes: previous K outside [1, k_max]");
  }
  if (*k_prev > 1) out.push_back(*k_prev - 1);
  out.push_back(*k_prev);
  if (*k_prev < config.k_max) out.push_back(*k_prev + 1);
  return out;
}

SdmsStep sdms_step(const WeightedDataset& data, std::optional<std::size_t> k_prev,
                   const SdmsConfig& config, std::size_t timestep) {
  config.validate();
  std::optional<SdmsStep> best;
  std::string last_failure = "no candidate fit";
  for (std::size_t k : candidate_sizes(k_prev, config)) {
    FitConfig fit = config.fit;
    fit.rng_seed = derive_seed(config.fit.rng_seed, {timestep, k});
    try {
      FittedModel fitted = em_fit(data, k, fit);
      fitted.criterion_score = score(config.criterion, fitted, data, config.param_count);
      const double change = change_code_length(k, k_prev, config);
      const double total = fitted.criterion_score + change;
      if (!best || total < best->total_cost) {
        best = SdmsStep{k, std::move(fitted), total, change};
      }
    } catch (const InsufficientDataError& e) {
      last_failure = e.what();
    } catch (const NumericalError& e) {
      last_failure = e.what();
    }
  }
  if (!best) throw StepFailureError("all candidate fits failed: " + last_failure, timestep);
  return std::move(*best);
}

TrackResult track_mc(const std::vector<WeightedDataset>& stream, const SdmsConfig& config) {
  config.validate();
  if (stream.empty()) throw InvalidInputError("track_mc: empty stream");
  TrackResult result;
  result.steps.reserve(stream.size());
  std::optional<std::size_t> k_prev;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const std::size_t t = i + 1;
    try {
      SdmsStep step = sdms_step(stream[i], k_prev, config, t);
      const double value = mc(step.fitted.model, stream[i]);
      k_prev = step.selected_k;
      result.steps.push_back(
          TrackPoint{step.selected_k, std::move(step.fitted), value, step.total_cost, false});
    } catch (const StepFailureError&) {
      if (result.steps.empty()) throw;
      TrackPoint carried = result.steps.back();
      carried.total_cost = std::numeric_limits<double>::quiet_NaN();
      carried.flagged = true;
      result.steps.push_back(std::move(carried));
    } catch (const NumericalDomainError& e) {
      throw StepFailureError(e.what(), t);
    }
  }
  return result;
}

std::vector<double> TrackResult::mc_sequence() const {
  std::vector<double> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.mc);
  return out;
}

std::vector<double> TrackResult::k_sequence() const {
  std::vector<double> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(static_cast<double>(s.selected_k));
  return out;
}

}  // namespace mixcx
