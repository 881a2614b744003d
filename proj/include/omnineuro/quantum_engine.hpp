#pragma once

// Geometric confidence on the Bloch sphere. The polar angle theta carries the
// decision evidence and P_move = sin^2(theta/2) is the |1> population; the
// azimuth phi is display-only.

#include <algorithm>
#include <cmath>
#include <numbers>

#include "omnineuro/error.hpp"

namespace omnineuro {

struct QuantumConfig {
  double omega_max = 0.15;  // rad per frame
  double gain = 2.0;

  bool operator==(const QuantumConfig&) const = default;
};

// P_move = |<1|psi>|^2 = sin^2(theta/2).
inline double p_move(double theta) {
  const double s = std::sin(theta / 2.0);
  return s * s;
}

struct QuantumState {
  double theta = std::numbers::pi / 2.0;
  double phi = 0.0;
  double p_move = 0.5;

  static QuantumState at(double theta, double phi = 0.0) {
    theta = std::clamp(theta, 0.0, std::numbers::pi);
    return {theta, phi, omnineuro::p_move(theta)};
  }

  bool operator==(const QuantumState&) const = default;
};

inline double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// theta_target = pi * sigmoid(gain * score); pi/2 at score 0.
inline double score_to_theta(double score, const QuantumConfig& cfg) {
  return std::numbers::pi * logistic(cfg.gain * score);
}

// Display azimuth in [0, 2pi) from the complexity difference.
inline double delta_hfd_to_phi(double delta_hfd) {
  const double phi = std::numbers::pi * (1.0 + std::tanh(2.0 * delta_hfd));
  return phi >= 2.0 * std::numbers::pi ? std::nextafter(2.0 * std::numbers::pi, 0.0) : phi;
}

// Moves theta toward the target by at most omega_max (no overshoot).
inline QuantumState update_state(const QuantumState& prev, double theta_target, const QuantumConfig& cfg,
                                 double phi) {
  if (!(cfg.omega_max > 0.0) || cfg.omega_max > std::numbers::pi)
    throw Error(ErrorCode::InvalidArgument, "omega_max must lie in (0, pi]");
  theta_target = std::clamp(theta_target, 0.0, std::numbers::pi);
  const double step = std::clamp(theta_target - prev.theta, -cfg.omega_max, cfg.omega_max);
  const double theta = std::abs(theta_target - prev.theta) <= cfg.omega_max ? theta_target : prev.theta + step;
  return QuantumState::at(theta, phi);
}

inline QuantumState update_state(const QuantumState& prev, double theta_target, const QuantumConfig& cfg) {
  return update_state(prev, theta_target, cfg, prev.phi);
}

}  // namespace omnineuro
