#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cstddef>
#include <optional>
#include <vector>

namespace mixcx {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
// One observation per row.
using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Diagonal jitter added to a covariance whose Cholesky factorization fails.
inline constexpr double kCovarianceJitter = 1e-6;
// exp() of anything below this is zero in double precision.
inline constexpr double kLogUnderflow = -745.0;
inline constexpr double kWeightSumTolerance = 1e-9;

/// Multivariate normal N(mean, covariance) with a cached Cholesky factor.
class GaussianComponent {
 public:
  /// Throws InvalidInputError on dimension mismatch, non-finite entries,
  /// asymmetric covariance, or a covariance that stays indefinite after
  /// adding kCovarianceJitter to the diagonal.
  GaussianComponent(Vector mean, Matrix covariance);

  const Vector& mean() const noexcept { return mean_; }
  const Matrix& covariance() const noexcept { return covariance_; }
  Eigen::Index dimension() const noexcept { return mean_.size(); }

  double log_pdf(const Eigen::Ref<const Vector>& x) const;
  /// log N(x_n | mean, covariance) for every row x_n.
  Vector log_pdf(const PointMatrix& points) const;

 private:
  Vector mean_;
  Matrix covariance_;
  Eigen::LLT<Matrix> llt_;
  double log_normalizer_ = 0.0;
};

/// f(x) = sum_k weights[k] * g_k(x). Zero weights are allowed.
class MixtureModel {
 public:
  MixtureModel(Vector weights, std::vector<GaussianComponent> components);

  std::size_t size() const noexcept { return components_.size(); }
  Eigen::Index dimension() const noexcept { return components_.front().dimension(); }
  const Vector& weights() const noexcept { return weights_; }
  const std::vector<GaussianComponent>& components() const noexcept { return components_; }
  const GaussianComponent& component(std::size_t k) const { return components_.at(k); }

 private:
  Vector weights_;
  std::vector<GaussianComponent> components_;
};

/// Data points with optional non-negative per-point weights.
/// Absent weights behave as all ones.
class WeightedDataset {
 public:
  explicit WeightedDataset(PointMatrix points);
  WeightedDataset(PointMatrix points, Vector weights);

  std::size_t size() const noexcept { return static_cast<std::size_t>(points_.rows()); }
  Eigen::Index dimension() const noexcept { return points_.cols(); }
  const PointMatrix& points() const noexcept { return points_; }
  auto point(std::size_t n) const { return points_.row(static_cast<Eigen::Index>(n)); }

  bool has_weights() const noexcept { return weights_.has_value(); }
  const std::optional<Vector>& weights() const noexcept { return weights_; }
  double weight(std::size_t n) const {
    return weights_ ? (*weights_)(static_cast<Eigen::Index>(n)) : 1.0;
  }
  double total_weight() const;

 private:
  PointMatrix points_;
  std::optional<Vector> weights_;
};

double log_density(const MixtureModel& model, const Eigen::Ref<const Vector>& x);

/// Posterior p(Z = k | X = x), evaluated in log space and normalized.
Vector responsibilities(const MixtureModel& model, const Eigen::Ref<const Vector>& x);

/// N x K matrix of log g_k(x_n).
Matrix component_log_pdfs(const MixtureModel& model, const PointMatrix& points);

/// Mixture complexity: the (weighted) empirical estimate of I(Z; X) in nats.
/// Throws NumericalDomainError when log f(x_n) < kLogUnderflow for some n.
double mc(const MixtureModel& model, const WeightedDataset& data);

struct McTermsOptions {
  // Raise NumericalDomainError when log f(x_n) < kLogUnderflow.
  bool check_underflow = true;
};

/// MC for an arbitrary mixture given log mixing weights (length K, -inf for
/// zero weights) and the N x K matrix of log component densities.
/// `data_weights`, when given, has length N; points with weight 0 are skipped.
double mc_from_log_terms(const Eigen::Ref<const Vector>& log_weights,
                         const Eigen::Ref<const Matrix>& log_pdfs,
                         const std::optional<Vector>& data_weights,
                         McTermsOptions options = {});

/// Shannon entropy of the mixing weights in nats, 0 log 0 := 0.
double latent_entropy(const Eigen::Ref<const Vector>& weights);

/// log(sum(exp(values))), -inf when every entry is -inf.
double log_sum_exp(const Eigen::Ref<const Vector>& values);

}  // namespace mixcx
