#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "omnineuro/error.hpp"
#include "omnineuro/signal_io.hpp"

namespace omnineuro {

struct ChaosConfig {
  int k_max = 10;

  bool operator==(const ChaosConfig&) const = default;
};

// Mean normalised curve length L(k) for k = 1..k_max.
//
// For offset m (1-based) the series x(m), x(m+k), ... has
// floor((N-m)/k) increments; its length is the sum of absolute increments
// times (N-1) / (floor((N-m)/k) * k), divided once more by k.
inline std::vector<double> higuchi_curve_lengths(std::span<const double> x, int k_max) {
  const size_t n = x.size();
  std::vector<double> lengths(static_cast<size_t>(k_max));
  for (size_t k = 1; k <= static_cast<size_t>(k_max); ++k) {
    double sum_over_m = 0.0;
    for (size_t m = 0; m < k; ++m) {
      const size_t steps = (n - 1 - m) / k;
      double abs_sum = 0.0;
      for (size_t i = m + k; i <= m + steps * k; i += k) abs_sum += std::abs(x[i] - x[i - k]);
      const double norm = static_cast<double>(n - 1) / (static_cast<double>(steps) * static_cast<double>(k));
      sum_over_m += abs_sum * norm / static_cast<double>(k);
    }
    lengths[k - 1] = sum_over_m / static_cast<double>(k);
  }
  return lengths;
}

// Higuchi fractal dimension: least-squares slope of ln L(k) against ln(1/k),
// all scales weighted equally.
inline double higuchi_hfd(std::span<const double> series, const ChaosConfig& cfg) {
  if (cfg.k_max < 2) throw Error(ErrorCode::InvalidArgument, "k_max must be at least 2");
  if (series.size() < 2 * static_cast<size_t>(cfg.k_max) + 2)
    throw Error(ErrorCode::SeriesTooShort, "need at least 2*k_max+2 samples, got " + std::to_string(series.size()));
  for (const double v : series)
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "series contains non-finite values");

  const auto lengths = higuchi_curve_lengths(series, cfg.k_max);
  const auto count = static_cast<double>(lengths.size());
  double sx = 0, sy = 0;
  std::vector<double> lx(lengths.size()), ly(lengths.size());
  for (size_t i = 0; i < lengths.size(); ++i) {
    if (!(lengths[i] > 0.0)) throw Error(ErrorCode::DegenerateSeries, "zero curve length (constant series)");
    lx[i] = -std::log(static_cast<double>(i + 1));
    ly[i] = std::log(lengths[i]);
    sx += lx[i];
    sy += ly[i];
  }
  const double mx = sx / count, my = sy / count;
  double sxy = 0, sxx = 0;
  for (size_t i = 0; i < lengths.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxy / sxx;
}

struct HfdPair {
  double c3 = 0.0;
  double c4 = 0.0;
  double delta() const { return c3 - c4; }
};

inline HfdPair hfd_pair(const EpochWindow& window, const ChaosConfig& cfg) {
  return {higuchi_hfd(window.channel("C3"), cfg), higuchi_hfd(window.channel("C4"), cfg)};
}

// HFD(C3) - HFD(C4).
inline double delta_hfd(const EpochWindow& window, const ChaosConfig& cfg) { return hfd_pair(window, cfg).delta(); }

}  // namespace omnineuro
