#include "mixcx/detect.hpp"

#include "mixcx/errors.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace mixcx {

std::string_view to_string(AlertMode mode) {
  return mode == AlertMode::McSequence ? "mc" : "k";
}

AlertMode parse_alert_mode(std::string_view name) {
  if (name == "mc" || name == "MC") return AlertMode::McSequence;
  if (name == "k" || name == "K") return AlertMode::KSequence;
  throw InvalidInputError("unknown alert mode '" + std::string(name) + "' (expected mc|k)");
}

void AlertConfig::validate() const {
  if (window < 1) throw InvalidInputError("alert config: window must be >= 1");
  if (min_gap < 1) throw InvalidInputError("alert config: min_gap must be >= 1");
  if (start_t < 2 * window) throw InvalidInputError("alert config: start_t must be >= 2*window");
  if (!(mc_threshold > 0.0)) throw InvalidInputError("alert config: threshold must be > 0");
}

double median(std::span<const double> values) {
  if (values.empty()) throw InvalidInputError("median of an empty window");
  std::vector<double> v(values.begin(), values.end());
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  if (v.size() % 2 == 1) return v[mid];
  const double upper = v[mid];
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

AlertSet detect_changes(std::span<const double> sequence, const AlertConfig& config) {
  config.validate();
  const std::size_t t_count = sequence.size();
  if (t_count < config.start_t) {
    throw InvalidInputError("detect_changes: sequence of length " + std::to_string(t_count) +
                            " is shorter than start_t=" + std::to_string(config.start_t));
  }
  const std::size_t w = config.window;
  AlertSet alerts;
  std::optional<std::size_t> latest;
  for (std::size_t t = config.start_t; t <= t_count; ++t) {
    // y_{t-2w+1..t-w} and y_{t-w+1..t}, 1-based.
    const double before = median(sequence.subspan(t - 2 * w, w));
    const double after = median(sequence.subspan(t - w, w));
    const bool fire = config.mode == AlertMode::McSequence
                          ? std::abs(before - after) > config.mc_threshold
                          : before != after;
    if (!fire) continue;
    if (latest && t - *latest < config.min_gap) continue;
    alerts.insert(t);
    latest = t;
  }
  return alerts;
}

void EvalConfig::validate() const {
  if (transaction_begin > transaction_end) throw InvalidInputError("eval: empty transaction period");
  if (horizon_begin > horizon_end) throw InvalidInputError("eval: empty horizon");
  if (transaction_begin < horizon_begin || transaction_end > horizon_end) {
    throw InvalidInputError("eval: transaction period must lie inside the horizon");
  }
  if (window < 1) throw InvalidInputError("eval: window must be >= 1");
}

EvalResult evaluate(const AlertSet& alerts, const EvalConfig& config) {
  config.validate();
  for (std::size_t t : alerts) {
    if (t < config.horizon_begin || t > config.horizon_end) {
      throw InvalidInputError("eval: alert at t=" + std::to_string(t) + " outside the horizon");
    }
  }
  EvalResult result;
  result.alerts = alerts;
  result.delay = config.delay_cap;
  const auto first = alerts.lower_bound(config.transaction_begin);
  if (first != alerts.end() && *first <= config.transaction_end) {
    result.delay = std::min(*first - config.transaction_begin, config.delay_cap);
  }
  const std::size_t accept_end = config.accept_end();
  for (std::size_t t = config.horizon_begin; t <= config.horizon_end; ++t) {
    const bool accepted = t >= config.transaction_begin && t <= accept_end;
    if (accepted) continue;
    ++result.non_accept_points;
    if (alerts.contains(t)) ++result.false_alarms;
  }
  result.far = result.non_accept_points == 0
                   ? 0.0
                   : static_cast<double>(result.false_alarms) /
                         static_cast<double>(result.non_accept_points);
  return result;
}

}  // namespace mixcx
