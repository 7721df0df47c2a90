#pragma once

#include <cstddef>
#include <set>
#include <span>
#include <string_view>

namespace mixcx {

enum class AlertMode {
  // Fire when the two adjacent window medians differ by more than mc_threshold.
  McSequence,
  // Fire whenever the two adjacent window medians differ at all.
  KSequence,
};

std::string_view to_string(AlertMode mode);
AlertMode parse_alert_mode(std::string_view name);

struct AlertConfig {
  std::size_t window = 5;
  double mc_threshold = 0.01;
  // An alert closer than this to the latest raised alert is suppressed.
  std::size_t min_gap = 5;
  std::size_t start_t = 10;
  AlertMode mode = AlertMode::McSequence;

  void validate() const;
};

/// Timesteps are 1-based throughout this module.
using AlertSet = std::set<std::size_t>;

/// Scans t = start_t..T comparing median(y[t-2w+1..t-w]) with median(y[t-w+1..t]).
/// `sequence[0]` holds y_1.
AlertSet detect_changes(std::span<const double> sequence, const AlertConfig& config);

/// Median of a window; the mean of the two middle values for even lengths.
double median(std::span<const double> values);

struct EvalConfig {
  std::size_t transaction_begin = 51;
  std::size_t transaction_end = 100;
  std::size_t horizon_begin = 10;
  std::size_t horizon_end = 150;
  // Alerts are tolerated until transaction_end + 2*window - 1.
  std::size_t window = 5;
  std::size_t delay_cap = 50;

  void validate() const;
  std::size_t accept_end() const { return transaction_end + 2 * window - 1; }
};

struct EvalResult {
  std::size_t delay = 0;
  double far = 0.0;
  std::size_t false_alarms = 0;
  std::size_t non_accept_points = 0;
  AlertSet alerts;
};

/// Delay = min(t* - transaction_begin, cap), with t* the first alert inside the
/// transaction period (cap when none); FAR = alerts outside ACCEPT over the
/// number of horizon points outside ACCEPT.
EvalResult evaluate(const AlertSet& alerts, const EvalConfig& config = {});

}  // namespace mixcx
