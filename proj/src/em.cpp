#include "mixcx/em.hpp"

#include "mixcx/errors.hpp"
#include "mixcx/seeding.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>

namespace mixcx {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

Vector data_weights_or_ones(const WeightedDataset& data) {
  return data.weights() ? *data.weights() : Vector::Ones(static_cast<Eigen::Index>(data.size()));
}

Vector log_of(const Vector& w) {
  Vector out(w.size());
  for (Eigen::Index k = 0; k < w.size(); ++k) out(k) = w(k) > 0.0 ? std::log(w(k)) : kNegInf;
  return out;
}

// Fills `log_joint` (N x K) with log pi_k + log g_k(x_n) and returns log f(x_n).
Vector e_step(const MixtureModel& model, const PointMatrix& points, Matrix& log_joint) {
  log_joint = component_log_pdfs(model, points);
  log_joint.rowwise() += log_of(model.weights()).transpose();
  Vector log_f(log_joint.rows());
  for (Eigen::Index n = 0; n < log_joint.rows(); ++n) {
    log_f(n) = log_sum_exp(log_joint.row(n).transpose());
  }
  return log_f;
}

struct WeightedMoments {
  Vector mean;
  Matrix covariance;
};

WeightedMoments moments(const PointMatrix& x, const Vector& w) {
  const double total = w.sum();
  Vector mean = (x.transpose() * w) / total;
  const Matrix centered = x.rowwise() - mean.transpose();
  Matrix cov = (centered.array().colwise() * w.array()).matrix().transpose() * centered / total;
  return {std::move(mean), std::move(cov)};
}

std::size_t sample_index(const Vector& mass, std::mt19937_64& rng) {
  const double total = mass.sum();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double target = unit(rng) * total;
  double acc = 0.0;
  for (Eigen::Index n = 0; n < mass.size(); ++n) {
    acc += mass(n);
    if (target < acc && mass(n) > 0.0) return static_cast<std::size_t>(n);
  }
  for (Eigen::Index n = mass.size() - 1; n >= 0; --n) {
    if (mass(n) > 0.0) return static_cast<std::size_t>(n);
  }
  return 0;
}

// k-means++ seeding, D^2 sampling weighted by the data weights.
std::vector<Vector> seed_means(const PointMatrix& x, const Vector& w, std::size_t k,
                               std::mt19937_64& rng) {
  std::vector<Vector> means;
  means.reserve(k);
  means.emplace_back(x.row(static_cast<Eigen::Index>(sample_index(w, rng))).transpose());
  Vector d2 = (x.rowwise() - means.back().transpose()).rowwise().squaredNorm();
  while (means.size() < k) {
    Vector mass = d2.cwiseProduct(w);
    const std::size_t pick = mass.sum() > 0.0 ? sample_index(mass, rng) : sample_index(w, rng);
    means.emplace_back(x.row(static_cast<Eigen::Index>(pick)).transpose());
    d2 = d2.cwiseMin((x.rowwise() - means.back().transpose()).rowwise().squaredNorm());
  }
  return means;
}

struct RunResult {
  std::optional<MixtureModel> model;
  double log_likelihood = kNegInf;
  std::vector<double> trace;
  int iterations = 0;
  bool converged = false;
};

RunResult run_em(const WeightedDataset& data, const Vector& w, std::size_t k,
                 const FitConfig& config, std::uint64_t seed) {
  const PointMatrix& x = data.points();
  const auto kk = static_cast<Eigen::Index>(k);
  const double total_weight = w.sum();
  std::mt19937_64 rng(seed);

  WeightedMoments global = moments(x, w);
  Matrix base_cov = global.covariance;
  base_cov.diagonal().array() += config.regularization;
  if (!(base_cov.diagonal().array() > 0.0).all()) {
    base_cov.diagonal().array() += kCovarianceJitter;
  }

  std::vector<Vector> means = seed_means(x, w, k, rng);
  std::vector<Matrix> covs(k, base_cov);
  Vector pis = Vector::Constant(kk, 1.0 / static_cast<double>(k));

  auto build = [&]() -> std::optional<MixtureModel> {
    std::vector<GaussianComponent> comps;
    comps.reserve(k);
    try {
      for (std::size_t j = 0; j < k; ++j) comps.emplace_back(means[j], covs[j]);
    } catch (const InvalidInputError&) {
      return std::nullopt;
    }
    return MixtureModel(pis / pis.sum(), std::move(comps));
  };

  RunResult result;
  int collapses = 0;
  double previous_average = kNegInf;
  Matrix log_joint;
  std::optional<MixtureModel> model = build();
  if (!model) return result;

  for (int it = 0; it < config.max_iterations; ++it) {
    const Vector log_f = e_step(*model, x, log_joint);
    const double ll = w.dot(log_f);
    if (!std::isfinite(ll)) return result;
    result.trace.push_back(ll);
    result.iterations = it + 1;
    const double average = ll / total_weight;
    if (average - previous_average < config.log_likelihood_tolerance) {
      result.converged = true;
      break;
    }
    previous_average = average;
    if (it + 1 == config.max_iterations) break;

    // M-step.
    Matrix resp = (log_joint.colwise() - log_f).array().exp().matrix();
    resp = resp.array().colwise() * w.array();
    const Vector mass = resp.colwise().sum().transpose();
    bool reinitialized = false;
    for (std::size_t j = 0; j < k; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      bool collapsed = !(mass(jj) > 1e-10 * total_weight);
      if (!collapsed) {
        Vector mean = (x.transpose() * resp.col(jj)) / mass(jj);
        const Matrix centered = x.rowwise() - mean.transpose();
        Matrix cov = (centered.array().colwise() * resp.col(jj).array()).matrix().transpose() *
                     centered / mass(jj);
        cov = 0.5 * (cov + cov.transpose());
        cov.diagonal().array() += config.regularization;
        // Regularization should keep every pivot near or above epsilon; a pivot
        // far below it means the factorization broke down numerically.
        Eigen::LLT<Matrix> llt(cov);
        collapsed = llt.info() != Eigen::Success || !cov.allFinite() ||
                    (llt.matrixLLT().diagonal().array().square() <
                     std::max(config.regularization, 1e-300) * 1e-3)
                        .any();
        if (!collapsed) {
          means[j] = std::move(mean);
          covs[j] = std::move(cov);
          pis(jj) = mass(jj) / total_weight;
        }
      }
      if (collapsed) {
        if (++collapses >= 2) return result;
        means[j] = x.row(static_cast<Eigen::Index>(sample_index(w, rng))).transpose();
        covs[j] = base_cov;
        pis(jj) = 1.0 / static_cast<double>(k);
        reinitialized = true;
      }
    }
    if (reinitialized) previous_average = kNegInf;
    model = build();
    if (!model) return result;
  }
  result.log_likelihood = result.trace.back();
  result.model = std::move(model);
  return result;
}

}  // namespace

void FitConfig::validate() const {
  if (restarts < 1) throw InvalidInputError("fit config: restarts must be >= 1");
  if (max_iterations < 1) throw InvalidInputError("fit config: max_iterations must be >= 1");
  if (!(log_likelihood_tolerance > 0.0)) throw InvalidInputError("fit config: tolerance must be > 0");
  if (!(regularization >= 0.0)) throw InvalidInputError("fit config: regularization must be >= 0");
}

std::string_view to_string(Criterion criterion) {
  switch (criterion) {
    case Criterion::AicObserved: return "AIC";
    case Criterion::AicComplete: return "AIC+comp";
    case Criterion::BicObserved: return "BIC";
    case Criterion::BicComplete: return "BIC+comp";
  }
  return "?";
}

Criterion parse_criterion(std::string_view name) {
  const std::string n = lower(name);
  if (n == "aic") return Criterion::AicObserved;
  if (n == "aic+comp") return Criterion::AicComplete;
  if (n == "bic") return Criterion::BicObserved;
  if (n == "bic+comp") return Criterion::BicComplete;
  throw InvalidInputError("unknown criterion '" + std::string(name) +
                          "' (expected AIC|AIC+comp|BIC|BIC+comp)");
}

std::string_view to_string(ParamCount count) {
  return count == ParamCount::Compact ? "compact" : "standard";
}

ParamCount parse_param_count(std::string_view name) {
  const std::string n = lower(name);
  if (n == "compact") return ParamCount::Compact;
  if (n == "standard") return ParamCount::Standard;
  throw InvalidInputError("unknown parameter count '" + std::string(name) +
                          "' (expected compact|standard)");
}

double free_parameter_count(std::size_t k, Eigen::Index dimension, ParamCount count) {
  const double dd = static_cast<double>(dimension);
  const double per_component = dd * (dd + 3.0) / 2.0;
  const double kd = static_cast<double>(k);
  return (kd - 1.0) + (count == ParamCount::Standard ? kd : 1.0) * per_component;
}

double observed_log_likelihood(const MixtureModel& model, const WeightedDataset& data) {
  if (data.dimension() != model.dimension()) throw InvalidInputError("dimension mismatch");
  Matrix log_joint;
  const Vector log_f = e_step(model, data.points(), log_joint);
  double total = 0.0;
  for (Eigen::Index n = 0; n < log_f.size(); ++n) {
    const double wn = data.weight(static_cast<std::size_t>(n));
    if (wn == 0.0) continue;
    if (!(log_f(n) >= kLogUnderflow)) {
      throw NumericalDomainError("log-likelihood: f(x_n) underflows", static_cast<std::size_t>(n));
    }
    total += wn * log_f(n);
  }
  return total;
}

double complete_log_likelihood(const MixtureModel& model, const WeightedDataset& data,
                               const std::vector<int>& assignments) {
  if (assignments.size() != data.size()) {
    throw InvalidAssignmentError("complete log-likelihood: one assignment per point required");
  }
  if (data.dimension() != model.dimension()) throw InvalidInputError("dimension mismatch");
  const Matrix log_pdfs = component_log_pdfs(model, data.points());
  double total = 0.0;
  for (std::size_t n = 0; n < assignments.size(); ++n) {
    const int z = assignments[n];
    if (z < 0 || static_cast<std::size_t>(z) >= model.size()) {
      throw InvalidAssignmentError("complete log-likelihood: assignment out of range at point " +
                                   std::to_string(n));
    }
    const double pi = model.weights()(z);
    if (!(pi > 0.0)) {
      throw InvalidAssignmentError("complete log-likelihood: point " + std::to_string(n) +
                                   " assigned to a zero-weight component");
    }
    const double wn = data.weight(n);
    if (wn == 0.0) continue;
    total += wn * (std::log(pi) + log_pdfs(static_cast<Eigen::Index>(n), z));
  }
  return total;
}

std::vector<int> hard_assignments(const MixtureModel& model, const WeightedDataset& data) {
  Matrix log_joint;
  e_step(model, data.points(), log_joint);
  std::vector<int> z(data.size());
  for (Eigen::Index n = 0; n < log_joint.rows(); ++n) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < log_joint.cols(); ++k) {
      if (log_joint(n, k) > log_joint(n, best)) best = k;
    }
    z[static_cast<std::size_t>(n)] = static_cast<int>(best);
  }
  return z;
}

FittedModel em_fit(const WeightedDataset& data, std::size_t k, const FitConfig& config) {
  config.validate();
  if (k < 1) throw InvalidInputError("em_fit: k must be >= 1");
  if (data.size() < k) {
    throw InsufficientDataError("em_fit: " + std::to_string(data.size()) +
                                " points cannot support " + std::to_string(k) + " components");
  }
  const Vector w = data_weights_or_ones(data);
  std::vector<RunResult> runs(static_cast<std::size_t>(config.restarts));
  detail::parallel_for(runs.size(), config.threads, [&](std::size_t r) {
    runs[r] = run_em(data, w, k, config, derive_seed(config.rng_seed, {r}));
  });

  std::size_t best = runs.size();
  for (std::size_t r = 0; r < runs.size(); ++r) {
    if (!runs[r].model) continue;
    if (best == runs.size() || runs[r].log_likelihood > runs[best].log_likelihood) best = r;
  }
  if (best == runs.size()) {
    throw FitFailureError("em_fit: all " + std::to_string(runs.size()) + " restarts collapsed (k=" +
                          std::to_string(k) + ")");
  }
  RunResult& run = runs[best];
  FittedModel fitted{.model = std::move(*run.model),
                     .observed_log_likelihood = run.log_likelihood,
                     .hard_assignments = {},
                     .criterion_score = 0.0,
                     .log_likelihood_trace = std::move(run.trace),
                     .iterations = run.iterations,
                     .restart_index = static_cast<int>(best),
                     .converged = run.converged};
  fitted.hard_assignments = hard_assignments(fitted.model, data);
  return fitted;
}

double score(Criterion criterion, const FittedModel& fitted, const WeightedDataset& data,
             ParamCount count) {
  const double d = free_parameter_count(fitted.model.size(), fitted.model.dimension(), count);
  const double n = static_cast<double>(data.size());
  switch (criterion) {
    case Criterion::AicObserved: return -fitted.observed_log_likelihood + d;
    case Criterion::AicComplete:
      return -complete_log_likelihood(fitted.model, data, fitted.hard_assignments) + d;
    case Criterion::BicObserved: return -fitted.observed_log_likelihood + 0.5 * d * std::log(n);
    case Criterion::BicComplete:
      return -complete_log_likelihood(fitted.model, data, fitted.hard_assignments) +
             0.5 * d * std::log(n);
  }
  throw InvalidInputError("score: unknown criterion");
}

MixtureModel fit_mixing_weights(const MixtureModel& initial, const WeightedDataset& data,
                                int max_iterations, double tolerance) {
  const Matrix log_pdfs = component_log_pdfs(initial, data.points());
  const Vector w = data_weights_or_ones(data);
  const double total = w.sum();
  Vector pi = initial.weights();
  Matrix log_joint(log_pdfs.rows(), log_pdfs.cols());
  for (int it = 0; it < max_iterations; ++it) {
    log_joint = log_pdfs;
    log_joint.rowwise() += log_of(pi).transpose();
    Vector next = Vector::Zero(pi.size());
    for (Eigen::Index n = 0; n < log_joint.rows(); ++n) {
      const double log_f = log_sum_exp(log_joint.row(n).transpose());
      if (!std::isfinite(log_f)) {
        throw NumericalDomainError("fit_mixing_weights: f(x_n) is zero", static_cast<std::size_t>(n));
      }
      next += w(n) * (log_joint.row(n).array() - log_f).exp().matrix().transpose();
    }
    next /= total;
    next /= next.sum();
    const double change = (next - pi).cwiseAbs().maxCoeff();
    pi = std::move(next);
    if (change < tolerance) break;
  }
  return MixtureModel(pi, initial.components());
}

}  // namespace mixcx
