#include "mixcx/mixture.hpp"

#include "mixcx/errors.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace mixcx {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool all_finite(const Eigen::Ref<const Matrix>& m) { return m.allFinite(); }

}  // namespace

GaussianComponent::GaussianComponent(Vector mean, Matrix covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance)) {
  const auto d = mean_.size();
  if (d == 0) throw InvalidInputError("gaussian component: empty mean");
  if (covariance_.rows() != d || covariance_.cols() != d) {
    throw InvalidInputError("gaussian component: covariance must be " + std::to_string(d) + "x" +
                            std::to_string(d));
  }
  if (!mean_.allFinite() || !all_finite(covariance_)) {
    throw InvalidInputError("gaussian component: non-finite parameters");
  }
  const double scale = std::max(1.0, covariance_.cwiseAbs().maxCoeff());
  if ((covariance_ - covariance_.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw InvalidInputError("gaussian component: covariance is not symmetric");
  }
  covariance_ = 0.5 * (covariance_ + covariance_.transpose());

  llt_.compute(covariance_);
  if (llt_.info() != Eigen::Success) {
    covariance_.diagonal().array() += kCovarianceJitter;
    llt_.compute(covariance_);
    if (llt_.info() != Eigen::Success) {
      throw InvalidInputError("gaussian component: covariance is not positive definite");
    }
  }
  const Matrix& l = llt_.matrixLLT();
  if ((l.diagonal().array() <= 0.0).any()) {
    throw InvalidInputError("gaussian component: covariance is not positive definite");
  }
  const double log_det = 2.0 * l.diagonal().array().log().sum();
  log_normalizer_ = -0.5 * (static_cast<double>(d) * std::log(2.0 * std::numbers::pi) + log_det);
}

double GaussianComponent::log_pdf(const Eigen::Ref<const Vector>& x) const {
  if (x.size() != dimension()) throw InvalidInputError("log_pdf: dimension mismatch");
  const Vector z = llt_.matrixL().solve(x - mean_);
  return log_normalizer_ - 0.5 * z.squaredNorm();
}

Vector GaussianComponent::log_pdf(const PointMatrix& points) const {
  if (points.cols() != dimension()) throw InvalidInputError("log_pdf: dimension mismatch");
  Matrix centered = (points.rowwise() - mean_.transpose()).transpose();
  llt_.matrixL().solveInPlace(centered);
  return (log_normalizer_ - 0.5 * centered.colwise().squaredNorm().array()).matrix().transpose();
}

MixtureModel::MixtureModel(Vector weights, std::vector<GaussianComponent> components)
    : weights_(std::move(weights)), components_(std::move(components)) {
  if (components_.empty()) throw InvalidInputError("mixture: needs at least one component");
  if (static_cast<std::size_t>(weights_.size()) != components_.size()) {
    throw InvalidInputError("mixture: weight count does not match component count");
  }
  if (!weights_.allFinite() || (weights_.array() < 0.0).any() || (weights_.array() > 1.0).any()) {
    throw InvalidInputError("mixture: weights must lie in [0, 1]");
  }
  if (std::abs(weights_.sum() - 1.0) > kWeightSumTolerance) {
    throw InvalidInputError("mixture: weights must sum to 1");
  }
  const auto d = components_.front().dimension();
  for (const auto& c : components_) {
    if (c.dimension() != d) throw InvalidInputError("mixture: components differ in dimension");
  }
}

WeightedDataset::WeightedDataset(PointMatrix points) : points_(std::move(points)) {
  if (points_.rows() < 1 || points_.cols() < 1) throw InvalidInputError("dataset: empty");
  if (!points_.allFinite()) throw InvalidInputError("dataset: non-finite coordinates");
}

WeightedDataset::WeightedDataset(PointMatrix points, Vector weights)
    : WeightedDataset(std::move(points)) {
  if (weights.size() != points_.rows()) {
    throw InvalidInputError("dataset: weight count does not match point count");
  }
  if (!weights.allFinite() || (weights.array() < 0.0).any()) {
    throw InvalidInputError("dataset: weights must be finite and non-negative");
  }
  if (!(weights.sum() > 0.0)) throw InvalidInputError("dataset: weights sum to zero");
  weights_ = std::move(weights);
}

double WeightedDataset::total_weight() const {
  return weights_ ? weights_->sum() : static_cast<double>(points_.rows());
}

double log_sum_exp(const Eigen::Ref<const Vector>& values) {
  if (values.size() == 0) return kNegInf;
  const double top = values.maxCoeff();
  if (top == kNegInf) return kNegInf;
  if (!std::isfinite(top)) return top;
  return top + std::log((values.array() - top).exp().sum());
}

namespace {

Vector log_joint_at(const MixtureModel& model, const Eigen::Ref<const Vector>& x) {
  if (x.size() != model.dimension()) throw InvalidInputError("point dimension mismatch");
  if (!x.allFinite()) throw InvalidInputError("non-finite point coordinates");
  const auto k_count = static_cast<Eigen::Index>(model.size());
  Vector terms(k_count);
  for (Eigen::Index k = 0; k < k_count; ++k) {
    const double w = model.weights()(k);
    terms(k) = w > 0.0 ? std::log(w) + model.component(static_cast<std::size_t>(k)).log_pdf(x)
                       : kNegInf;
  }
  return terms;
}

}  // namespace

double log_density(const MixtureModel& model, const Eigen::Ref<const Vector>& x) {
  return log_sum_exp(log_joint_at(model, x));
}

Vector responsibilities(const MixtureModel& model, const Eigen::Ref<const Vector>& x) {
  const Vector terms = log_joint_at(model, x);
  const double log_f = log_sum_exp(terms);
  if (!std::isfinite(log_f)) throw DegenerateModelError("responsibilities: f(x) is zero");
  Vector r(terms.size());
  for (Eigen::Index k = 0; k < terms.size(); ++k) {
    r(k) = terms(k) == kNegInf ? 0.0 : std::exp(terms(k) - log_f);
  }
  return r / r.sum();
}

Matrix component_log_pdfs(const MixtureModel& model, const PointMatrix& points) {
  if (points.cols() != model.dimension()) throw InvalidInputError("point dimension mismatch");
  Matrix out(points.rows(), static_cast<Eigen::Index>(model.size()));
  for (std::size_t k = 0; k < model.size(); ++k) {
    out.col(static_cast<Eigen::Index>(k)) = model.component(k).log_pdf(points);
  }
  return out;
}

double mc_from_log_terms(const Eigen::Ref<const Vector>& log_weights,
                         const Eigen::Ref<const Matrix>& log_pdfs,
                         const std::optional<Vector>& data_weights, McTermsOptions options) {
  const Eigen::Index n_count = log_pdfs.rows();
  const Eigen::Index k_count = log_pdfs.cols();
  if (log_weights.size() != k_count) throw InvalidInputError("mc: weight/component mismatch");
  if (data_weights && data_weights->size() != n_count) {
    throw InvalidInputError("mc: data weight count mismatch");
  }

  // Uniform data weights cancel in the normalization; use the plain mean.
  bool weighted = false;
  if (data_weights && n_count > 0) {
    const double first = (*data_weights)(0);
    weighted = ((data_weights->array() != first).any());
  }

  Vector joint(k_count);
  double total = 0.0;
  double weight_sum = 0.0;
  for (Eigen::Index n = 0; n < n_count; ++n) {
    const double wn = weighted ? (*data_weights)(n) : 1.0;
    if (wn == 0.0) continue;
    for (Eigen::Index k = 0; k < k_count; ++k) joint(k) = log_weights(k) + log_pdfs(n, k);
    const double log_f = log_sum_exp(joint);
    if (options.check_underflow && !(log_f >= kLogUnderflow)) {
      throw NumericalDomainError("mc: f(x_n) underflows", static_cast<std::size_t>(n));
    }
    if (!std::isfinite(log_f)) {
      throw NumericalDomainError("mc: f(x_n) is not finite", static_cast<std::size_t>(n));
    }
    double inner = 0.0;
    for (Eigen::Index k = 0; k < k_count; ++k) {
      if (log_weights(k) == kNegInf) continue;
      const double r = std::exp(joint(k) - log_f);
      if (r == 0.0) continue;  // 0 log 0 := 0
      inner += r * (log_pdfs(n, k) - log_f);
    }
    total += wn * inner;
    weight_sum += wn;
  }
  if (!(weight_sum > 0.0)) throw InvalidInputError("mc: total data weight is zero");
  return total / weight_sum;
}

double mc(const MixtureModel& model, const WeightedDataset& data) {
  if (data.dimension() != model.dimension()) throw InvalidInputError("mc: dimension mismatch");
  const Vector& w = model.weights();
  Vector log_w(w.size());
  for (Eigen::Index k = 0; k < w.size(); ++k) log_w(k) = w(k) > 0.0 ? std::log(w(k)) : kNegInf;
  return mc_from_log_terms(log_w, component_log_pdfs(model, data.points()), data.weights());
}

double latent_entropy(const Eigen::Ref<const Vector>& weights) {
  if (weights.size() == 0) throw InvalidInputError("latent_entropy: empty weights");
  if (!weights.allFinite() || (weights.array() < 0.0).any()) {
    throw InvalidInputError("latent_entropy: weights must be non-negative");
  }
  if (std::abs(weights.sum() - 1.0) > kWeightSumTolerance) {
    throw InvalidInputError("latent_entropy: weights must sum to 1");
  }
  double h = 0.0;
  for (Eigen::Index k = 0; k < weights.size(); ++k) {
    if (weights(k) > 0.0) h -= weights(k) * std::log(weights(k));
  }
  return h;
}

}  // namespace mixcx
