#pragma once

#include <cmath>
#include <span>

#include "omnineuro/error.hpp"
#include "omnineuro/signal_io.hpp"

namespace omnineuro {

struct PhysicsConfig {
  double epsilon = 1e-10;  // microvolt^2

  bool operator==(const PhysicsConfig&) const = default;
};

// Population (1/N) variance.
inline double population_variance(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double mean = 0.0;
  for (const double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double acc = 0.0;
  for (const double v : x) acc += (v - mean) * (v - mean);
  return acc / static_cast<double>(x.size());
}

// Log energy lateralization: ln((Var(C4) + eps) / (Var(C3) + eps)), taken as
// a difference of logs so swapping the channels negates it bit for bit.
// Positive when C4 carries more power than C3.
inline double lateralization_index(std::span<const double> c3, std::span<const double> c4, const PhysicsConfig& cfg) {
  if (!(cfg.epsilon > 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be positive");
  return std::log(population_variance(c4) + cfg.epsilon) - std::log(population_variance(c3) + cfg.epsilon);
}

inline double compute_l_idx(const EpochWindow& window, const PhysicsConfig& cfg) {
  return lateralization_index(window.channel("C3"), window.channel("C4"), cfg);
}

}  // namespace omnineuro
