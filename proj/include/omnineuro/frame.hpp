#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "omnineuro/artifact_veto.hpp"
#include "omnineuro/fusion.hpp"
#include "omnineuro/sonification.hpp"

namespace omnineuro {

// One processed hop: the unit pushed to telemetry clients and stored in the
// session log.
struct FeedbackFrame {
  uint64_t seq = 0;
  double t_s = 0.0;  // window start
  double l_idx = 0.0;
  double delta_hfd = 0.0;
  double theta = 0.0;
  double phi = 0.0;
  double p_move = 0.0;
  Decision decision;
  VetoResult veto;
  SonificationParams sonification;
  double latency_ms = 0.0;
  std::optional<std::string> pcm;  // base64 16-bit LE PCM of this frame's audio

  bool operator==(const FeedbackFrame&) const = default;
};

}  // namespace omnineuro
