#pragma once

// Seeded synthetic motor-imagery recordings: AR(1) background, a mu (~10 Hz)
// and beta (~20 Hz) rhythm over the motor strip, and contralateral
// desynchronisation during Left/Right cues. Used for the bundled evaluation
// cohort, CLI demos, and tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "omnineuro/signal_io.hpp"

namespace omnineuro {

struct SyntheticSpec {
  size_t n_channels = 8;
  double sample_rate_hz = 160.0;
  size_t n_trials = 40;       // alternating Left/Right in shuffled order
  double rest_s = 2.0;        // rest before each cue
  double task_s = 4.0;        // cue duration
  double erd_depth = 0.6;     // fractional mu/beta amplitude drop contralateral to imagery
  double mu_uv = 10.0;
  double noise_uv = 3.0;      // AR(1) innovation std
  double artifact_rate = 0.0; // probability that a trial carries an EMG burst
  uint64_t seed = 1;
};

struct ArtifactSpan {
  double onset_s;
  double duration_s;
};

struct SyntheticRecording {
  Recording recording;
  std::vector<ArtifactSpan> artifacts;
};

// Montage order: motor channels first so small montages always contain C3/C4.
inline const std::vector<std::string>& synthetic_montage() {
  static const std::vector<std::string> names = {
      "C3",  "C4",  "Cz",  "C1",  "C2",  "C5",  "C6",  "Fc3", "Fc4", "Fcz", "Fc1", "Fc2", "Fc5",
      "Fc6", "Cp3", "Cp4", "Cpz", "Cp1", "Cp2", "Cp5", "Cp6", "Fp1", "Fpz", "Fp2", "Af7", "Af3",
      "Afz", "Af4", "Af8", "F7",  "F5",  "F3",  "F1",  "Fz",  "F2",  "F4",  "F6",  "F8",  "Ft7",
      "Ft8", "T7",  "T8",  "T9",  "T10", "Tp7", "Tp8", "P7",  "P5",  "P3",  "P1",  "Pz",  "P2",
      "P4",  "P6",  "P8",  "Po7", "Po3", "Poz", "Po4", "Po8", "O1",  "Oz",  "O2",  "Iz"};
  return names;
}

inline SyntheticRecording make_synthetic_recording(const SyntheticSpec& spec) {
  const auto& montage = synthetic_montage();
  if (spec.n_channels < 2 || spec.n_channels > montage.size())
    throw Error(ErrorCode::InvalidArgument, "synthetic montage supports 2..64 channels");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  const double fs = spec.sample_rate_hz;
  const double trial_s = spec.rest_s + spec.task_s;
  const double total_s = trial_s * static_cast<double>(spec.n_trials) + spec.rest_s;
  const auto n = static_cast<size_t>(std::llround(total_s * fs));

  SyntheticRecording out;
  auto& rec = out.recording;
  rec.sample_rate_hz = fs;
  rec.channels.assign(montage.begin(), montage.begin() + static_cast<long>(spec.n_channels));
  rec.samples.assign(spec.n_channels, std::vector<double>(n, 0.0));

  // Balanced, shuffled cue order.
  std::vector<TrialLabel> cues;
  for (size_t t = 0; t < spec.n_trials; ++t) cues.push_back(t % 2 == 0 ? TrialLabel::Left : TrialLabel::Right);
  std::shuffle(cues.begin(), cues.end(), rng);

  // Per-sample ERD envelopes for the two hemispheres (1 = no desync).
  std::vector<double> env_left_hemi(n, 1.0), env_right_hemi(n, 1.0);
  const double ramp_s = 0.3;
  for (size_t t = 0; t < spec.n_trials; ++t) {
    const double onset = spec.rest_s + static_cast<double>(t) * trial_s;
    rec.annotations.push_back({onset - spec.rest_s, spec.rest_s, "T0"});
    rec.annotations.push_back({onset, spec.task_s, cues[t] == TrialLabel::Left ? "T1" : "T2"});
    // Left-hand imagery desynchronises the right hemisphere (C4) and vice versa.
    auto& env = cues[t] == TrialLabel::Left ? env_right_hemi : env_left_hemi;
    const double depth = std::clamp(spec.erd_depth * (0.85 + 0.3 * uni(rng)), 0.0, 1.0);
    for (size_t i = static_cast<size_t>(onset * fs); i < std::min(n, static_cast<size_t>((onset + spec.task_s) * fs)); ++i) {
      const double tau = static_cast<double>(i) / fs - onset;
      const double rise = std::min({1.0, tau / ramp_s, (spec.task_s - tau) / ramp_s});
      env[i] = 1.0 - depth * std::max(0.0, rise);
    }
  }

  // Two rhythmic sources with slowly drifting phase.
  auto rhythm = [&](double freq, double amp) {
    std::vector<double> s(n);
    double phase = 2.0 * std::numbers::pi * uni(rng);
    double drift = 0.0;
    for (size_t i = 0; i < n; ++i) {
      drift = 0.999 * drift + 0.02 * gauss(rng);
      phase += 2.0 * std::numbers::pi * (freq + drift) / fs;
      s[i] = amp * std::sin(phase);
    }
    return s;
  };
  const std::vector<std::vector<double>> sources = {rhythm(10.0, spec.mu_uv), rhythm(10.5, spec.mu_uv),
                                                    rhythm(20.0, 0.4 * spec.mu_uv), rhythm(21.0, 0.4 * spec.mu_uv)};

  for (size_t c = 0; c < spec.n_channels; ++c) {
    auto& row = rec.samples[c];
    const std::string& name = rec.channels[c];
    // Mixing weights of (left-hemisphere mu/beta, right-hemisphere mu/beta).
    double w_left = 0.15, w_right = 0.15;
    if (name == "C3") { w_left = 1.0; w_right = 0.1; }
    else if (name == "C4") { w_left = 0.1; w_right = 1.0; }
    else if (name == "C1" || name == "C5" || name == "Cp3" || name == "Fc3") { w_left = 0.5; w_right = 0.1; }
    else if (name == "C2" || name == "C6" || name == "Cp4" || name == "Fc4") { w_left = 0.1; w_right = 0.5; }
    double ar = 0.0;
    for (size_t i = 0; i < n; ++i) {
      ar = 0.95 * ar + spec.noise_uv * gauss(rng);
      const double left = env_left_hemi[i] * (sources[0][i] + sources[2][i]);
      const double right = env_right_hemi[i] * (sources[1][i] + sources[3][i]);
      row[i] = ar + w_left * left + w_right * right;
    }
  }

  // EMG-like bursts: broadband, large, on every channel.
  for (size_t t = 0; t < spec.n_trials; ++t) {
    if (!(uni(rng) < spec.artifact_rate)) continue;
    const double onset = spec.rest_s + static_cast<double>(t) * trial_s + spec.task_s * uni(rng) * 0.5;
    const double dur = 0.6;
    out.artifacts.push_back({onset, dur});
    for (size_t c = 0; c < spec.n_channels; ++c)
      for (size_t i = static_cast<size_t>(onset * fs); i < std::min(n, static_cast<size_t>((onset + dur) * fs)); ++i)
        rec.samples[c][i] += 20.0 * spec.mu_uv * gauss(rng);
  }
  return out;
}

// Adds one EMG-like burst on every channel, for veto demonstrations.
inline void inject_burst(Recording& rec, double onset_s, double duration_s, double amplitude_uv, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, amplitude_uv);
  const auto first = seconds_to_samples(onset_s, rec.sample_rate_hz);
  const auto last = std::min(rec.n_samples(), seconds_to_samples(onset_s + duration_s, rec.sample_rate_hz));
  for (auto& row : rec.samples)
    for (size_t i = first; i < last; ++i) row[i] += gauss(rng);
}

}  // namespace omnineuro
