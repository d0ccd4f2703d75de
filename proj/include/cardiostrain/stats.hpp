#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace cardiostrain {

/// Linear-interpolated quantile (q in [0, 1]) of an unsorted sample; the argument is reordered.
inline double quantile_inplace(std::vector<double>& v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double quantile(std::vector<double> v, double q) { return quantile_inplace(v, q); }
inline double median(std::vector<double> v) { return quantile_inplace(v, 0.5); }

}  // namespace cardiostrain
