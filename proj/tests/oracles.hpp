#pragma once

// Independent reference implementations used only by the tests. They share no
// code with the library: densities go through an explicit inverse and
// determinant in long double, and mixture sums are formed directly.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <set>
#include <vector>

namespace oracle {

using LVector = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
using LMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

struct Gaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

inline long double pdf(const Gaussian& g, const Eigen::VectorXd& x) {
  const LMatrix cov = g.cov.cast<long double>();
  const LVector diff = (x - g.mean).cast<long double>();
  const long double quad = diff.dot(cov.inverse() * diff);
  const auto d = static_cast<long double>(x.size());
  return std::exp(-0.5L * quad) /
         std::sqrt(std::pow(2.0L * std::numbers::pi_v<long double>, d) * cov.determinant());
}

inline long double mixture_pdf(const std::vector<double>& pi, const std::vector<Gaussian>& g,
                               const Eigen::VectorXd& x) {
  long double f = 0.0L;
  for (std::size_t k = 0; k < g.size(); ++k) f += pi[k] * pdf(g[k], x);
  return f;
}

/// Direct summation of the weighted MC definition, no log-space tricks.
inline long double mc(const std::vector<double>& pi, const std::vector<Gaussian>& g,
                      const std::vector<Eigen::VectorXd>& xs, const std::vector<double>& w = {}) {
  long double num = 0.0L;
  long double den = 0.0L;
  for (std::size_t n = 0; n < xs.size(); ++n) {
    const long double wn = w.empty() ? 1.0L : w[n];
    const long double f = mixture_pdf(pi, g, xs[n]);
    long double inner = 0.0L;
    for (std::size_t k = 0; k < g.size(); ++k) {
      const long double gk = pdf(g[k], xs[n]);
      const long double r = pi[k] * gk / f;
      if (r > 0.0L) inner += r * std::log(gk / f);
    }
    num += wn * inner;
    den += wn;
  }
  return num / den;
}

inline long double observed_ll(const std::vector<double>& pi, const std::vector<Gaussian>& g,
                               const std::vector<Eigen::VectorXd>& xs) {
  long double s = 0.0L;
  for (const auto& x : xs) s += std::log(mixture_pdf(pi, g, x));
  return s;
}

/// I(Z;X) = sum_k pi_k int g_k log(g_k / f) dx for a 1D mixture by composite Simpson.
inline double mutual_information_1d(const std::vector<double>& pi, const std::vector<double>& mu,
                                    const std::vector<double>& sigma, double lo, double hi,
                                    std::size_t intervals) {
  auto normal = [](double x, double m, double s) {
    const double z = (x - m) / s;
    return std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * std::numbers::pi));
  };
  auto integrand = [&](double x) {
    double f = 0.0;
    for (std::size_t k = 0; k < pi.size(); ++k) f += pi[k] * normal(x, mu[k], sigma[k]);
    double v = 0.0;
    for (std::size_t k = 0; k < pi.size(); ++k) {
      const double gk = normal(x, mu[k], sigma[k]);
      if (gk > 0.0 && f > 0.0) v += pi[k] * gk * std::log(gk / f);
    }
    return v;
  };
  if (intervals % 2) ++intervals;
  const double h = (hi - lo) / static_cast<double>(intervals);
  double s = integrand(lo) + integrand(hi);
  for (std::size_t i = 1; i < intervals; ++i) {
    s += (i % 2 ? 4.0 : 2.0) * integrand(lo + h * static_cast<double>(i));
  }
  return s * h / 3.0;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Literal transcription of the alert rule over 1-based y.
inline std::set<std::size_t> alerts(const std::vector<double>& y, std::size_t w, double threshold,
                                    bool k_mode, std::size_t min_gap, std::size_t start) {
  std::set<std::size_t> out;
  std::size_t latest = 0;
  bool any = false;
  for (std::size_t t = std::max(start, 2 * w); t <= y.size(); ++t) {
    std::vector<double> a(y.begin() + static_cast<long>(t - 2 * w), y.begin() + static_cast<long>(t - w));
    std::vector<double> b(y.begin() + static_cast<long>(t - w), y.begin() + static_cast<long>(t));
    const double diff = std::abs(median(a) - median(b));
    const bool fire = k_mode ? diff != 0.0 : diff > threshold;
    if (fire && (!any || t - latest >= min_gap)) {
      out.insert(t);
      latest = t;
      any = true;
    }
  }
  return out;
}

struct Score {
  std::size_t delay;
  double far;
};

/// Counts points one by one over the horizon.
inline Score score(const std::set<std::size_t>& alerts, std::size_t begin = 51,
                   std::size_t end = 100, std::size_t h0 = 10, std::size_t h1 = 150,
                   std::size_t w = 5) {
  const std::size_t accept_end = end + 2 * w - 1;
  std::size_t delay = 50;
  for (std::size_t t = begin; t <= end; ++t) {
    if (alerts.count(t)) {
      delay = std::min<std::size_t>(t - begin, 50);
      break;
    }
  }
  std::size_t outside = 0;
  std::size_t fa = 0;
  for (std::size_t t = h0; t <= h1; ++t) {
    if (t >= begin && t <= accept_end) continue;
    ++outside;
    if (alerts.count(t)) ++fa;
  }
  return {delay, static_cast<double>(fa) / static_cast<double>(outside)};
}

}  // namespace oracle
