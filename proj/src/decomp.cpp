#include "mixcx/decomp.hpp"

#include "mixcx/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace mixcx {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double safe_log(double v) { return v > 0.0 ? std::log(v) : kNegInf; }

}  // namespace

Hierarchy::Hierarchy(Matrix q) : q_(std::move(q)) {
  if (q_.rows() < 1 || q_.cols() < 1) throw InvalidInputError("hierarchy: empty matrix");
  if (!q_.allFinite() || (q_.array() < 0.0).any()) {
    throw InvalidInputError("hierarchy: entries must be finite and non-negative");
  }
  for (Eigen::Index k = 0; k < q_.rows(); ++k) {
    if (std::abs(q_.row(k).sum() - 1.0) > kWeightSumTolerance) {
      throw InvalidInputError("hierarchy: row " + std::to_string(k) + " does not sum to 1");
    }
  }
}

Hierarchy Hierarchy::from_groups(const std::vector<std::size_t>& groups, std::size_t upper_count) {
  Matrix q = Matrix::Zero(static_cast<Eigen::Index>(groups.size()),
                          static_cast<Eigen::Index>(upper_count));
  for (std::size_t k = 0; k < groups.size(); ++k) {
    if (groups[k] >= upper_count) throw InvalidInputError("hierarchy: group index out of range");
    q(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(groups[k])) = 1.0;
  }
  return Hierarchy(std::move(q));
}

UpperModel upper_model(const MixtureModel& model, const Hierarchy& hierarchy) {
  if (hierarchy.lower_count() != model.size()) {
    throw InvalidInputError("upper_model: hierarchy has " + std::to_string(hierarchy.lower_count()) +
                            " rows for " + std::to_string(model.size()) + " components");
  }
  const Matrix& q = hierarchy.q();
  const Vector& pi = model.weights();
  UpperModel upper{q.transpose() * pi, Matrix::Zero(q.cols(), q.rows())};
  for (Eigen::Index l = 0; l < q.cols(); ++l) {
    if (!(upper.rho(l) > 0.0)) {
      upper.rho(l) = 0.0;
      continue;
    }
    upper.phi.row(l) = (q.col(l).cwiseProduct(pi) / upper.rho(l)).transpose();
  }
  return upper;
}

double McDecomposition::additivity_residual() const {
  double sum = mc_interaction;
  for (const auto& c : components) sum += c.contribution;
  return mc_total - sum;
}

McDecomposition decompose(const MixtureModel& model, const WeightedDataset& data,
                          const Hierarchy& hierarchy) {
  if (data.dimension() != model.dimension()) throw InvalidInputError("decompose: dimension mismatch");
  const UpperModel upper = upper_model(model, hierarchy);
  const Matrix log_g = component_log_pdfs(model, data.points());
  const Eigen::Index n_count = log_g.rows();
  const Eigen::Index k_count = log_g.cols();
  const Eigen::Index l_count = upper.rho.size();

  Vector log_pi(k_count);
  for (Eigen::Index k = 0; k < k_count; ++k) log_pi(k) = safe_log(model.weights()(k));
  Vector log_rho(l_count);
  for (Eigen::Index l = 0; l < l_count; ++l) log_rho(l) = safe_log(upper.rho(l));
  Matrix log_phi(l_count, k_count);
  for (Eigen::Index l = 0; l < l_count; ++l) {
    for (Eigen::Index k = 0; k < k_count; ++k) log_phi(l, k) = safe_log(upper.phi(l, k));
  }

  McDecomposition out;
  out.mc_total = mc_from_log_terms(log_pi, log_g, data.weights());

  // log f(x_n), log(rho_l h_l(x_n)) and log h_l(x_n).
  Vector log_f(n_count);
  Matrix log_rho_h(n_count, l_count);
  Matrix log_h = Matrix::Zero(n_count, l_count);
  Vector scratch(k_count);
  for (Eigen::Index n = 0; n < n_count; ++n) {
    log_f(n) = log_sum_exp((log_pi + log_g.row(n).transpose()).eval());
    for (Eigen::Index l = 0; l < l_count; ++l) {
      if (log_rho(l) == kNegInf) {
        log_rho_h(n, l) = kNegInf;
        continue;
      }
      for (Eigen::Index k = 0; k < k_count; ++k) {
        scratch(k) = safe_log(hierarchy.q()(k, l)) + log_pi(k) + log_g(n, k);
      }
      log_rho_h(n, l) = log_sum_exp(scratch);
      log_h(n, l) = log_rho_h(n, l) - log_rho(l);
    }
  }
  out.mc_interaction = mc_from_log_terms(log_rho, log_h, data.weights());

  const double total_weight = data.total_weight();
  out.components.resize(static_cast<std::size_t>(l_count));
  for (Eigen::Index l = 0; l < l_count; ++l) {
    auto& comp = out.components[static_cast<std::size_t>(l)];
    if (log_rho(l) == kNegInf) continue;
    Vector point_weights(n_count);
    for (Eigen::Index n = 0; n < n_count; ++n) {
      point_weights(n) = data.weight(static_cast<std::size_t>(n)) * std::exp(log_rho_h(n, l) - log_f(n));
    }
    const double mass = point_weights.sum();
    comp.weight = mass / total_weight;
    if (!(mass > 0.0)) continue;
    comp.mc = mc_from_log_terms(log_phi.row(l).transpose(), log_g, point_weights,
                                McTermsOptions{.check_underflow = false});
    comp.contribution = comp.weight * comp.mc;
  }
  return out;
}

void FuzzyCMeansConfig::validate() const {
  if (l < 1) throw InvalidInputError("fuzzy c-means: l must be >= 1");
  if (!(m > 1.0)) throw InvalidInputError("fuzzy c-means: m must be > 1");
  if (max_iterations < 1) throw InvalidInputError("fuzzy c-means: max_iterations must be >= 1");
  if (!(tolerance > 0.0)) throw InvalidInputError("fuzzy c-means: tolerance must be > 0");
}

Vector fuzzy_membership(const Vector& point, const std::vector<Vector>& centers, double m) {
  const auto l_count = static_cast<Eigen::Index>(centers.size());
  Vector d2(l_count);
  for (Eigen::Index l = 0; l < l_count; ++l) {
    d2(l) = (point - centers[static_cast<std::size_t>(l)]).squaredNorm();
  }
  Vector q = Vector::Zero(l_count);
  const double nearest = d2.minCoeff();
  if (nearest == 0.0) {
    // Split evenly among coinciding centers.
    const double hits = static_cast<double>((d2.array() == 0.0).count());
    for (Eigen::Index l = 0; l < l_count; ++l) q(l) = d2(l) == 0.0 ? 1.0 / hits : 0.0;
    return q;
  }
  const double exponent = 1.0 / (m - 1.0);
  for (Eigen::Index l = 0; l < l_count; ++l) q(l) = std::pow(nearest / d2(l), exponent);
  return q / q.sum();
}

double fuzzy_cmeans_loss(const std::vector<WeightedPoint>& points,
                         const std::vector<Vector>& centers, const Matrix& memberships, double m) {
  double loss = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].weight == 0.0) continue;
    for (std::size_t l = 0; l < centers.size(); ++l) {
      const double q = memberships(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l));
      if (q == 0.0) continue;
      loss += points[i].weight * std::pow(q, m) * (points[i].position - centers[l]).squaredNorm();
    }
  }
  return loss;
}

namespace {

std::size_t count_distinct(std::vector<Vector> positions) {
  std::sort(positions.begin(), positions.end(), [](const Vector& a, const Vector& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
  });
  return static_cast<std::size_t>(
      std::unique(positions.begin(), positions.end(),
                  [](const Vector& a, const Vector& b) { return a == b; }) -
      positions.begin());
}

std::size_t sample(const std::vector<double>& mass, std::mt19937_64& rng) {
  double total = 0.0;
  for (double v : mass) total += v;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double target = unit(rng) * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < mass.size(); ++i) {
    acc += mass[i];
    if (target < acc && mass[i] > 0.0) return i;
  }
  for (std::size_t i = mass.size(); i-- > 0;) {
    if (mass[i] > 0.0) return i;
  }
  return 0;
}

}  // namespace

FuzzyCMeansResult fuzzy_cmeans(const std::vector<WeightedPoint>& points,
                               const FuzzyCMeansConfig& config) {
  config.validate();
  if (points.empty()) throw InvalidInputError("fuzzy c-means: no points");
  const auto dim = points.front().position.size();
  std::vector<std::size_t> active;
  double total_weight = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (p.position.size() != dim || !p.position.allFinite()) {
      throw InvalidInputError("fuzzy c-means: point " + std::to_string(i) + " is malformed");
    }
    if (!(p.weight >= 0.0) || !std::isfinite(p.weight)) {
      throw InvalidInputError("fuzzy c-means: weights must be finite and non-negative");
    }
    if (p.weight > 0.0) active.push_back(i);
    total_weight += p.weight;
  }
  if (!(total_weight > 0.0)) throw InvalidInputError("fuzzy c-means: weights sum to zero");
  std::vector<Vector> active_positions;
  for (std::size_t i : active) active_positions.push_back(points[i].position);
  const std::size_t distinct = count_distinct(active_positions);
  if (distinct < config.l) {
    throw InvalidInputError("fuzzy c-means: " + std::to_string(distinct) +
                            " distinct points for " + std::to_string(config.l) + " centers");
  }

  // k-means++ seeding weighted by the point weights.
  std::mt19937_64 rng(config.rng_seed);
  std::vector<double> mass(active.size());
  for (std::size_t a = 0; a < active.size(); ++a) mass[a] = points[active[a]].weight;
  FuzzyCMeansResult result;
  result.centers.push_back(points[active[sample(mass, rng)]].position);
  std::vector<double> d2(active.size(), std::numeric_limits<double>::infinity());
  while (result.centers.size() < config.l) {
    for (std::size_t a = 0; a < active.size(); ++a) {
      d2[a] = std::min(d2[a], (points[active[a]].position - result.centers.back()).squaredNorm());
      mass[a] = points[active[a]].weight * d2[a];
    }
    result.centers.push_back(points[active[sample(mass, rng)]].position);
  }

  const auto n_count = static_cast<Eigen::Index>(points.size());
  const auto l_count = static_cast<Eigen::Index>(config.l);
  auto update_memberships = [&] {
    result.memberships.resize(n_count, l_count);
    for (Eigen::Index i = 0; i < n_count; ++i) {
      result.memberships.row(i) =
          fuzzy_membership(points[static_cast<std::size_t>(i)].position, result.centers, config.m)
              .transpose();
    }
  };

  update_memberships();
  result.loss_trace.push_back(fuzzy_cmeans_loss(points, result.centers, result.memberships, config.m));
  for (int it = 0; it < config.max_iterations; ++it) {
    double movement = 0.0;
    for (Eigen::Index l = 0; l < l_count; ++l) {
      Vector numerator = Vector::Zero(dim);
      double denominator = 0.0;
      for (std::size_t i : active) {
        const double coeff =
            points[i].weight * std::pow(result.memberships(static_cast<Eigen::Index>(i), l), config.m);
        numerator += coeff * points[i].position;
        denominator += coeff;
      }
      if (!(denominator > 0.0)) continue;
      Vector updated = numerator / denominator;
      auto& center = result.centers[static_cast<std::size_t>(l)];
      movement = std::max(movement, (updated - center).norm());
      center = std::move(updated);
    }
    update_memberships();
    result.loss_trace.push_back(
        fuzzy_cmeans_loss(points, result.centers, result.memberships, config.m));
    result.iterations = it + 1;
    if (movement < config.tolerance) break;
  }
  return result;
}

DecompositionTrack decompose_track(const std::vector<WeightedDataset>& stream, TrackResult track,
                                   const FuzzyCMeansConfig& fcm_config) {
  if (track.steps.size() != stream.size()) {
    throw InvalidInputError("decompose_track: trajectory length differs from stream length");
  }
  struct Slot {
    std::size_t t;
    std::size_t k;
  };
  std::vector<WeightedPoint> pool;
  std::vector<Slot> slots;
  for (std::size_t t = 0; t < track.steps.size(); ++t) {
    const MixtureModel& model = track.steps[t].fitted.model;
    for (std::size_t k = 0; k < model.size(); ++k) {
      const double pi = model.weights()(static_cast<Eigen::Index>(k));
      if (!(pi > 0.0)) continue;
      pool.push_back({model.component(k).mean(), pi});
      slots.push_back({t, k});
    }
  }
  FuzzyCMeansResult fcm = fuzzy_cmeans(pool, fcm_config);

  DecompositionTrack out;
  out.centers = fcm.centers;
  const auto l_count = static_cast<Eigen::Index>(fcm_config.l);
  std::vector<Matrix> q(track.steps.size());
  for (std::size_t t = 0; t < track.steps.size(); ++t) {
    const MixtureModel& model = track.steps[t].fitted.model;
    q[t] = Matrix::Zero(static_cast<Eigen::Index>(model.size()), l_count);
    // Zero-weight components sit entirely in their nearest upper component.
    for (std::size_t k = 0; k < model.size(); ++k) {
      const Vector& mean = model.component(k).mean();
      Eigen::Index nearest = 0;
      for (Eigen::Index l = 1; l < l_count; ++l) {
        if ((mean - fcm.centers[static_cast<std::size_t>(l)]).squaredNorm() <
            (mean - fcm.centers[static_cast<std::size_t>(nearest)]).squaredNorm()) {
          nearest = l;
        }
      }
      q[t](static_cast<Eigen::Index>(k), nearest) = 1.0;
    }
  }
  for (std::size_t s = 0; s < slots.size(); ++s) {
    q[slots[s].t].row(static_cast<Eigen::Index>(slots[s].k)) =
        fcm.memberships.row(static_cast<Eigen::Index>(s));
  }
  for (std::size_t t = 0; t < track.steps.size(); ++t) {
    out.hierarchies.emplace_back(std::move(q[t]));
    out.decompositions.push_back(
        decompose(track.steps[t].fitted.model, stream[t], out.hierarchies.back()));
  }
  out.track = std::move(track);
  return out;
}

DecompositionTrack track_decomposition(const std::vector<WeightedDataset>& stream,
                                       const SdmsConfig& sdms_config,
                                       const FuzzyCMeansConfig& fcm_config) {
  fcm_config.validate();
  return decompose_track(stream, track_mc(stream, sdms_config), fcm_config);
}

}  // namespace mixcx
