#pragma once

#include "mixcx/mixture.hpp"
#include "mixcx/sdms.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace mixcx {

/// Soft assignment of K lower components to L upper components.
/// Row k holds the share of lower component k in each upper component.
class Hierarchy {
 public:
  /// Throws InvalidInputError unless every row is non-negative and sums to 1 (1e-9).
  explicit Hierarchy(Matrix q);

  /// Hard partition: lower component k goes to upper component groups[k].
  static Hierarchy from_groups(const std::vector<std::size_t>& groups, std::size_t upper_count);

  const Matrix& q() const noexcept { return q_; }
  std::size_t lower_count() const noexcept { return static_cast<std::size_t>(q_.rows()); }
  std::size_t upper_count() const noexcept { return static_cast<std::size_t>(q_.cols()); }

 private:
  Matrix q_;
};

struct UpperModel {
  Vector rho;  // length L
  Matrix phi;  // L x K, zero row when rho_l == 0
};

UpperModel upper_model(const MixtureModel& model, const Hierarchy& hierarchy);

struct ComponentDecomposition {
  double weight = 0.0;        // W(component l)
  double mc = 0.0;            // MC(component l)
  double contribution = 0.0;  // weight * mc
};

struct McDecomposition {
  double mc_total = 0.0;
  double mc_interaction = 0.0;
  std::vector<ComponentDecomposition> components;

  /// mc_total - mc_interaction - sum of contributions; zero up to rounding.
  double additivity_residual() const;
};

/// Splits MC(total) into MC(interaction) plus per-upper-component contributions.
McDecomposition decompose(const MixtureModel& model, const WeightedDataset& data,
                          const Hierarchy& hierarchy);

struct FuzzyCMeansConfig {
  std::size_t l = 4;
  double m = 1.5;
  int max_iterations = 300;
  double tolerance = 1e-6;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

struct WeightedPoint {
  Vector position;
  double weight = 1.0;
};

struct FuzzyCMeansResult {
  std::vector<Vector> centers;
  Matrix memberships;  // one row per input point, row-stochastic
  std::vector<double> loss_trace;
  int iterations = 0;
};

/// Weighted fuzzy c-means minimizing sum_i w_i sum_l Q_il^m ||x_i - c_l||^2.
/// Throws InvalidInputError with fewer than l distinct positive-weight points.
FuzzyCMeansResult fuzzy_cmeans(const std::vector<WeightedPoint>& points,
                               const FuzzyCMeansConfig& config);

/// Weighted fuzzy c-means loss for given centers and memberships.
double fuzzy_cmeans_loss(const std::vector<WeightedPoint>& points,
                         const std::vector<Vector>& centers, const Matrix& memberships, double m);

/// Standard fuzzy membership row of one point against fixed centers.
Vector fuzzy_membership(const Vector& point, const std::vector<Vector>& centers, double m);

struct DecompositionTrack {
  TrackResult track;
  std::vector<Vector> centers;
  std::vector<Hierarchy> hierarchies;  // one per timestep
  std::vector<McDecomposition> decompositions;
};

/// Tracking MC with decomposition: SDMS per window, one fuzzy c-means over all
/// (mean, weight) pairs across time, then the decomposition at every window.
DecompositionTrack track_decomposition(const std::vector<WeightedDataset>& stream,
                                       const SdmsConfig& sdms_config,
                                       const FuzzyCMeansConfig& fcm_config);

/// Same as track_decomposition, reusing an existing SDMS trajectory.
DecompositionTrack decompose_track(const std::vector<WeightedDataset>& stream, TrackResult track,
                                   const FuzzyCMeansConfig& fcm_config);

}  // namespace mixcx
