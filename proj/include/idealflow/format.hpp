#pragma once

#include <cmath>
#include <cstdio>
#include <string>

namespace idealflow {

/// Decimal text with 12 significant digits; the output precision of every
/// file and API response.
inline std::string format_number(double v) {
  if (v == 0.0) return "0";  // also folds -0
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

/// v rounded to 12 significant digits, for JSON serialization.
inline double round_significant(double v) {
  if (v == 0.0 || !std::isfinite(v)) return v == 0.0 ? 0.0 : v;
  return std::stod(format_number(v));
}

}  // namespace idealflow
