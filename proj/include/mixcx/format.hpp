#pragma once

#include <cmath>
#include <cstdio>
#include <string>

namespace mixcx {

/// Every real written to CSV uses 9 significant digits.
inline std::string format_real(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.9g", value);
  return buffer;
}

}  // namespace mixcx
