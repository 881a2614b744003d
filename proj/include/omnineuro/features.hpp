#pragma once

#include "omnineuro/chaos_engine.hpp"
#include "omnineuro/fusion.hpp"
#include "omnineuro/physics_engine.hpp"

namespace omnineuro {

struct EngineConfig {
  PhysicsConfig physics;
  ChaosConfig chaos;

  bool operator==(const EngineConfig&) const = default;
};

struct WindowFeatures {
  FeatureVector vector;
  bool degenerate = false;  // a motor channel was flat; HFD values are 0
};

// Runs the energy and complexity engines on one window.
inline WindowFeatures extract_features(const EpochWindow& window, const EngineConfig& cfg) {
  WindowFeatures out;
  out.vector.l_idx = compute_l_idx(window, cfg.physics);
  try {
    const auto hfd = hfd_pair(window, cfg.chaos);
    out.vector.hfd_c3 = hfd.c3;
    out.vector.hfd_c4 = hfd.c4;
    out.vector.delta_hfd = hfd.delta();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateSeries) throw;
    out.degenerate = true;
  }
  return out;
}

}  // namespace omnineuro
