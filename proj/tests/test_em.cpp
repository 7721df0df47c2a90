#include "mixcx/em.hpp"
#include "mixcx/errors.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace mixcx;

namespace {

PointMatrix two_blobs(std::size_t per, double shift, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  PointMatrix p(static_cast<Eigen::Index>(2 * per), 2);
  for (Eigen::Index n = 0; n < p.rows(); ++n) {
    p(n, 0) = (n < static_cast<Eigen::Index>(per) ? 0.0 : shift) + z(rng);
    p(n, 1) = z(rng);
  }
  return p;
}

GaussianComponent normal1(double mu, double var = 1.0) {
  return GaussianComponent(Vector::Constant(1, mu), Matrix::Constant(1, 1, var));
}

FittedModel fitted_of(MixtureModel model, const WeightedDataset& data) {
  FittedModel f{.model = model};
  f.observed_log_likelihood = observed_log_likelihood(f.model, data);
  f.hard_assignments = hard_assignments(f.model, data);
  return f;
}

}  // namespace

TEST_CASE("k = 1 recovers the sample mean and covariance") {
  const PointMatrix p = two_blobs(40, 3.0, 5);
  const WeightedDataset data(p);
  FitConfig cfg;
  cfg.restarts = 2;
  const FittedModel f = em_fit(data, 1, cfg);
  const Vector mean = p.colwise().mean().transpose();
  const Matrix centered = p.rowwise() - mean.transpose();
  const Matrix cov = centered.transpose() * centered / static_cast<double>(p.rows());
  CHECK((f.model.component(0).mean() - mean).norm() < 1e-12);
  CHECK((f.model.component(0).covariance() - cov).cwiseAbs().maxCoeff() <= 1e-6 + 1e-12);
  CHECK(f.model.weights()(0) == 1.0);
}

TEST_CASE("k = 2 recovers the separated two-cluster layout") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const WeightedDataset data(two_blobs(300, 6.0, seed));
    FitConfig cfg;
    cfg.rng_seed = seed;
    const FittedModel f = em_fit(data, 2, cfg);
    const std::size_t left = f.model.component(0).mean()(0) < f.model.component(1).mean()(0) ? 0 : 1;
    const std::size_t right = 1 - left;
    Vector a(2);
    a << 0.0, 0.0;
    Vector b(2);
    b << 6.0, 0.0;
    CHECK((f.model.component(left).mean() - a).cwiseAbs().maxCoeff() < 0.3);
    CHECK((f.model.component(right).mean() - b).cwiseAbs().maxCoeff() < 0.3);
    CHECK(std::abs(f.model.weights()(0) - 0.5) < 0.1);
  }
}

TEST_CASE("k = 2 on a single Gaussian stays close to the k = 1 likelihood") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> z(0.0, 1.0);
  PointMatrix p(400, 1);
  for (Eigen::Index n = 0; n < p.rows(); ++n) p(n, 0) = z(rng);
  const WeightedDataset data(p);
  FitConfig cfg;
  cfg.rng_seed = 4;
  const FittedModel one = em_fit(data, 1, cfg);
  const FittedModel two = em_fit(data, 2, cfg);
  CHECK(two.observed_log_likelihood >= one.observed_log_likelihood - 1e-6);
  CHECK(two.observed_log_likelihood - one.observed_log_likelihood <= 5.0);
}

TEST_CASE("observed log-likelihood") {
  const MixtureModel std_normal(Vector::Ones(1), {normal1(0.0)});
  PointMatrix zero(1, 1);
  zero << 0.0;
  CHECK(observed_log_likelihood(std_normal, WeightedDataset(zero)) ==
        doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)));

  Vector pi(2);
  pi << 0.35, 0.65;
  const MixtureModel model(pi, {normal1(-1.0, 0.8), normal1(2.0, 1.7)});
  PointMatrix three(3, 1);
  three << -0.4, 0.9, 3.3;
  PointMatrix doubled(6, 1);
  doubled << -0.4, 0.9, 3.3, -0.4, 0.9, 3.3;
  const double once = observed_log_likelihood(model, WeightedDataset(three));
  CHECK(observed_log_likelihood(model, WeightedDataset(doubled)) == doctest::Approx(2.0 * once).epsilon(1e-15));

  std::vector<Eigen::VectorXd> xs;
  for (double x : {-0.4, 0.9, 3.3}) xs.push_back(Eigen::VectorXd::Constant(1, x));
  const std::vector<oracle::Gaussian> g{
      {Eigen::VectorXd::Constant(1, -1.0), Eigen::MatrixXd::Constant(1, 1, 0.8)},
      {Eigen::VectorXd::Constant(1, 2.0), Eigen::MatrixXd::Constant(1, 1, 1.7)}};
  const double direct = static_cast<double>(oracle::observed_ll({0.35, 0.65}, g, xs));
  CHECK(once == doctest::Approx(direct).epsilon(1e-13));
  CHECK(once == doctest::Approx(-5.7971160824117653).epsilon(1e-12));

  // Complete likelihood with argmax assignments, summed directly.
  const std::vector<int> z = hard_assignments(model, WeightedDataset(three));
  long double complete = 0.0L;
  const double pis[2] = {0.35, 0.65};
  for (std::size_t n = 0; n < 3; ++n) {
    complete += std::log(pis[z[n]] * oracle::pdf(g[static_cast<std::size_t>(z[n])], xs[n]));
  }
  const double c = complete_log_likelihood(model, WeightedDataset(three), z);
  CHECK(c == doctest::Approx(static_cast<double>(complete)).epsilon(1e-13));
  CHECK(c <= once);
}

TEST_CASE("complete equals observed for K = 1") {
  const MixtureModel model(Vector::Ones(1), {normal1(0.5, 2.0)});
  PointMatrix p(4, 1);
  p << 0.0, 1.0, -2.0, 3.0;
  const WeightedDataset data(p);
  CHECK(complete_log_likelihood(model, data, {0, 0, 0, 0}) == observed_log_likelihood(model, data));
  CHECK_THROWS_AS(complete_log_likelihood(model, data, {0, 0, 1, 0}), InvalidAssignmentError);
  CHECK_THROWS_AS(complete_log_likelihood(model, data, {0, 0}), InvalidAssignmentError);
}

TEST_CASE("criteria arithmetic") {
  PointMatrix zero(1, 1);
  zero << 0.0;
  const WeightedDataset one_point(zero);
  const FittedModel f = fitted_of(MixtureModel(Vector::Ones(1), {normal1(0.0)}), one_point);
  CHECK(free_parameter_count(1, 1, ParamCount::Compact) == 2.0);
  CHECK(score(Criterion::AicObserved, f, one_point) == doctest::Approx(0.9189385332046727 + 2.0));
  CHECK(score(Criterion::BicObserved, f, one_point) == doctest::Approx(-f.observed_log_likelihood));

  const WeightedDataset big(two_blobs(500, 4.0, 9));
  Vector half(2);
  half << 0.5, 0.5;
  Vector m2(2);
  m2 << 4.0, 0.0;
  const FittedModel g = fitted_of(
      MixtureModel(half, {GaussianComponent(Vector::Zero(2), Matrix::Identity(2, 2)),
                          GaussianComponent(m2, Matrix::Identity(2, 2))}),
      big);
  for (auto count : {ParamCount::Compact, ParamCount::Standard}) {
    const double d = free_parameter_count(2, 2, count);
    CHECK(score(Criterion::BicObserved, g, big, count) - score(Criterion::AicObserved, g, big, count) ==
          doctest::Approx(d * (std::log(1000.0) / 2.0 - 1.0)));
    CHECK(score(Criterion::BicComplete, g, big, count) - score(Criterion::AicComplete, g, big, count) ==
          doctest::Approx(d * (std::log(1000.0) / 2.0 - 1.0)));
  }
  CHECK(free_parameter_count(3, 2, ParamCount::Compact) == 2.0 + 5.0);
  CHECK(free_parameter_count(3, 2, ParamCount::Standard) == 2.0 + 15.0);
  // Penalty grows with D for fixed likelihood.
  CHECK(score(Criterion::AicObserved, g, big, ParamCount::Standard) >
        score(Criterion::AicObserved, g, big, ParamCount::Compact));
}

TEST_CASE("criterion names round trip") {
  for (auto c : {Criterion::AicObserved, Criterion::AicComplete, Criterion::BicObserved,
                 Criterion::BicComplete}) {
    CHECK(parse_criterion(to_string(c)) == c);
  }
  CHECK(parse_criterion("bic+comp") == Criterion::BicComplete);
  try {
    parse_criterion("NML");
    FAIL("expected InvalidInputError");
  } catch (const InvalidInputError& e) {
    CHECK(std::string(e.what()).find("AIC|AIC+comp|BIC|BIC+comp") != std::string::npos);
  }
  CHECK(parse_param_count("standard") == ParamCount::Standard);
  CHECK_THROWS_AS(parse_param_count("other"), InvalidInputError);
}

TEST_CASE("EM log-likelihood trace is non-decreasing") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> kd(1, 4);
  std::uniform_int_distribution<int> dd(1, 3);
  std::normal_distribution<double> z(0.0, 1.0);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int k = kd(rng);
    const int d = dd(rng);
    PointMatrix p(60, d);
    for (Eigen::Index n = 0; n < p.rows(); ++n) {
      const double offset = 4.0 * static_cast<double>(n % 3);
      for (Eigen::Index j = 0; j < d; ++j) p(n, j) = (j == 0 ? offset : 0.0) + z(rng);
    }
    FitConfig cfg;
    cfg.restarts = 2;
    cfg.rng_seed = static_cast<std::uint64_t>(trial);
    const FittedModel f = em_fit(WeightedDataset(p), static_cast<std::size_t>(k), cfg);
    for (std::size_t i = 1; i < f.log_likelihood_trace.size(); ++i) {
      CHECK(f.log_likelihood_trace[i] >= f.log_likelihood_trace[i - 1] - 1e-8);
    }
    ++checked;
  }
  CHECK(checked == 100);
}

TEST_CASE("EM is deterministic and hard assignments are consistent") {
  const WeightedDataset data(two_blobs(80, 3.0, 21));
  FitConfig cfg;
  cfg.rng_seed = 99;
  const FittedModel a = em_fit(data, 3, cfg);
  const FittedModel b = em_fit(data, 3, cfg);
  CHECK(a.observed_log_likelihood == b.observed_log_likelihood);
  CHECK(a.hard_assignments == b.hard_assignments);
  CHECK(a.log_likelihood_trace == b.log_likelihood_trace);
  CHECK(a.restart_index == b.restart_index);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(a.model.weights()(static_cast<Eigen::Index>(k)) == b.model.weights()(static_cast<Eigen::Index>(k)));
    CHECK(a.model.component(k).mean() == b.model.component(k).mean());
    CHECK(a.model.component(k).covariance() == b.model.component(k).covariance());
  }
  CHECK(hard_assignments(a.model, data) == a.hard_assignments);

  FitConfig threaded = cfg;
  threaded.threads = 4;
  const FittedModel c = em_fit(data, 3, threaded);
  CHECK(c.observed_log_likelihood == a.observed_log_likelihood);
}

TEST_CASE("EM input errors") {
  PointMatrix p(2, 1);
  p << 0.0, 1.0;
  FitConfig cfg;
  CHECK_THROWS_AS(em_fit(WeightedDataset(p), 3, cfg), InsufficientDataError);
  CHECK_THROWS_AS(em_fit(WeightedDataset(p), 0, cfg), InvalidInputError);
  cfg.restarts = 0;
  CHECK_THROWS_AS(em_fit(WeightedDataset(p), 1, cfg), InvalidInputError);
}

TEST_CASE("fit_mixing_weights keeps MC within [0, log K]") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> z(0.0, 1.0);
  PointMatrix p(50, 1);
  for (Eigen::Index n = 0; n < p.rows(); ++n) p(n, 0) = (n % 2 ? 2.0 : -1.0) + z(rng);
  const WeightedDataset data(p);
  Vector pi = Vector::Constant(3, 1.0 / 3.0);
  const MixtureModel initial(pi, {normal1(-1.0), normal1(0.5, 2.0), normal1(2.0)});
  const MixtureModel fitted = fit_mixing_weights(initial, data);
  CHECK(std::abs(fitted.weights().sum() - 1.0) < 1e-12);
  CHECK(observed_log_likelihood(fitted, data) >= observed_log_likelihood(initial, data));
  const double value = mc(fitted, data);
  CHECK(value >= -1e-9);
  CHECK(value <= std::log(3.0) + 1e-9);
}
