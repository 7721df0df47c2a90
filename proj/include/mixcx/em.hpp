#pragma once

#include "mixcx/mixture.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mixcx {

struct FitConfig {
  int restarts = 10;
  int max_iterations = 200;
  // Stop once the mean per-point log-likelihood improves by less than this.
  double log_likelihood_tolerance = 1e-4;
  // Added to every covariance diagonal in the M-step.
  double regularization = 1e-6;
  std::uint64_t rng_seed = 0;
  // Worker threads for independent restarts; 0 picks the hardware count.
  int threads = 1;

  void validate() const;
};

enum class Criterion { AicObserved, AicComplete, BicObserved, BicComplete };

/// "AIC", "AIC+comp", "BIC", "BIC+comp".
std::string_view to_string(Criterion criterion);
/// Inverse of to_string (case-insensitive). Throws InvalidInputError.
Criterion parse_criterion(std::string_view name);

/// How the free-parameter count D enters AIC/BIC penalties.
enum class ParamCount {
  // D = (K - 1) + d(d + 3)/2, one covariance-parameter block for all components.
  Compact,
  // D = (K - 1) + K d(d + 3)/2, the usual count for a full-covariance GMM.
  Standard,
};

std::string_view to_string(ParamCount count);
ParamCount parse_param_count(std::string_view name);

double free_parameter_count(std::size_t k, Eigen::Index dimension, ParamCount count);

struct FittedModel {
  MixtureModel model;
  double observed_log_likelihood = 0.0;
  // 0-based argmax responsibility per point; ties go to the lowest index.
  std::vector<int> hard_assignments;
  double criterion_score = 0.0;
  // Observed log-likelihood at each E-step of the selected run.
  std::vector<double> log_likelihood_trace;
  int iterations = 0;
  int restart_index = 0;
  bool converged = false;
};

/// Best of `config.restarts` EM runs by observed log-likelihood.
/// Throws InsufficientDataError when N < k, FitFailureError when every run collapses.
FittedModel em_fit(const WeightedDataset& data, std::size_t k, const FitConfig& config);

double observed_log_likelihood(const MixtureModel& model, const WeightedDataset& data);

/// sum_n log(pi_{z_n} N(x_n | mu_{z_n}, Sigma_{z_n})) with 0-based assignments.
double complete_log_likelihood(const MixtureModel& model, const WeightedDataset& data,
                               const std::vector<int>& assignments);

/// argmax_k p(Z = k | x_n) for each point, lowest index on ties.
std::vector<int> hard_assignments(const MixtureModel& model, const WeightedDataset& data);

/// Model code length; lower is better.
double score(Criterion criterion, const FittedModel& fitted, const WeightedDataset& data,
             ParamCount count = ParamCount::Compact);

/// Maximizes the observed likelihood over the mixing weights only, with the
/// components held fixed (fixed-point EM on pi).
MixtureModel fit_mixing_weights(const MixtureModel& initial, const WeightedDataset& data,
                                int max_iterations = 10000, double tolerance = 1e-14);

}  // namespace mixcx
