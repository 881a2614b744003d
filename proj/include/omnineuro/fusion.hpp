#pragma once

// Adaptive vote: per-user logistic fusion of the energy and complexity
// metrics, followed by the safety gate.

#include <cmath>
#include <span>
#include <string_view>

#include "omnineuro/artifact_veto.hpp"
#include "omnineuro/error.hpp"
#include "omnineuro/quantum_engine.hpp"
#include "omnineuro/signal_io.hpp"

namespace omnineuro {

struct FeatureVector {
  double l_idx = 0.0;
  double hfd_c3 = 0.0;
  double hfd_c4 = 0.0;
  double delta_hfd = 0.0;

  bool operator==(const FeatureVector&) const = default;
};

struct FusionWeights {
  double w_physics = 0.0;
  double w_chaos = 0.0;
  double bias = 0.0;
  double quantum_gain = 1.0;

  bool operator==(const FusionWeights&) const = default;
};

enum class DecisionClass { Left, Neutral, Right };
enum class DecisionReason { Confident, AmbiguityZone, ArtifactVeto, DegenerateSignal };

constexpr std::string_view to_string(DecisionClass c) {
  switch (c) {
    case DecisionClass::Left: return "Left";
    case DecisionClass::Neutral: return "Neutral";
    case DecisionClass::Right: return "Right";
  }
  return "Neutral";
}

constexpr std::string_view to_string(DecisionReason r) {
  switch (r) {
    case DecisionReason::Confident: return "Confident";
    case DecisionReason::AmbiguityZone: return "AmbiguityZone";
    case DecisionReason::ArtifactVeto: return "ArtifactVeto";
    case DecisionReason::DegenerateSignal: return "DegenerateSignal";
  }
  return "Confident";
}

struct Decision {
  DecisionClass cls = DecisionClass::Neutral;
  double p_move = 0.5;
  DecisionReason reason = DecisionReason::AmbiguityZone;

  bool operator==(const Decision&) const = default;
};

struct LabeledFeature {
  FeatureVector features;
  TrialLabel label = TrialLabel::Left;  // Left or Right
};

inline double fuse(const FeatureVector& fv, const FusionWeights& w) {
  return w.w_physics * fv.l_idx + w.w_chaos * fv.delta_hfd + w.bias;
}

// Logistic regression on (l_idx, delta_hfd), Right = 1, full-batch gradient
// descent from zero: 500 iterations, step 0.1.
inline FusionWeights calibrate(std::span<const LabeledFeature> data) {
  size_t n_left = 0, n_right = 0;
  for (const auto& d : data) {
    if (d.label == TrialLabel::Left) ++n_left;
    else if (d.label == TrialLabel::Right) ++n_right;
    else throw Error(ErrorCode::InvalidArgument, "calibration labels must be Left or Right");
  }
  if (n_left == 0 || n_right == 0) throw Error(ErrorCode::SingleClassData, "calibration needs both classes");
  if (n_left < 4 || n_right < 4) throw Error(ErrorCode::InsufficientData, "calibration needs at least 4 examples per class");

  constexpr int kIterations = 500;
  constexpr double kStep = 0.1;
  FusionWeights w;
  const auto n = static_cast<double>(data.size());
  for (int it = 0; it < kIterations; ++it) {
    double g_phys = 0.0, g_chaos = 0.0, g_bias = 0.0;
    for (const auto& d : data) {
      const double y = d.label == TrialLabel::Right ? 1.0 : 0.0;
      const double err = logistic(fuse(d.features, w)) - y;
      g_phys += err * d.features.l_idx;
      g_chaos += err * d.features.delta_hfd;
      g_bias += err;
    }
    w.w_physics -= kStep * g_phys / n;
    w.w_chaos -= kStep * g_chaos / n;
    w.bias -= kStep * g_bias / n;
  }
  w.quantum_gain = 1.0;
  return w;
}

// Fraction of examples whose fused score has the sign of their class.
inline double fusion_accuracy(std::span<const LabeledFeature> data, const FusionWeights& w) {
  if (data.empty()) return 0.0;
  size_t correct = 0;
  for (const auto& d : data) {
    const bool right = fuse(d.features, w) > 0.0;
    correct += right == (d.label == TrialLabel::Right);
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

// Safety gate. Precedence: artifact veto, degenerate signal, ambiguity zone
// (0.4 < p < 0.6, both bounds exclusive), then the confident classes.
inline Decision decide(double p, const VetoResult& veto_result, bool degenerate) {
  if (veto_result.rejected) return {DecisionClass::Neutral, p, DecisionReason::ArtifactVeto};
  if (degenerate) return {DecisionClass::Neutral, p, DecisionReason::DegenerateSignal};
  if (p > 0.4 && p < 0.6) return {DecisionClass::Neutral, p, DecisionReason::AmbiguityZone};
  if (p >= 0.6) return {DecisionClass::Right, p, DecisionReason::Confident};
  return {DecisionClass::Left, p, DecisionReason::Confident};
}

}  // namespace omnineuro
