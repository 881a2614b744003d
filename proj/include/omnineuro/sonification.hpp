#pragma once

// Neuro-sonification: confidence -> pitch on a two-octave C-major scale,
// complexity -> waveshaper distortion, energy -> loudness. Neutral decisions
// fade the tone out in fixed steps instead of cutting it.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "omnineuro/error.hpp"
#include "omnineuro/fusion.hpp"

namespace omnineuro {

inline constexpr double kAudioSampleRate = 44100.0;
inline constexpr double kGainStep = 0.2;

// A3..A5 on the C-major diatonic scale, as MIDI note numbers.
inline constexpr std::array<int, 15> kScaleMidi = {57, 59, 60, 62, 64, 65, 67, 69, 71, 72, 74, 76, 77, 79, 81};

inline double midi_to_hz(int note) { return 440.0 * std::pow(2.0, (note - 69) / 12.0); }

inline double scale_degree_hz(size_t degree) { return midi_to_hz(kScaleMidi.at(degree)); }

struct SonificationParams {
  double freq_hz = 220.0;
  double distortion = 0.0;
  double gain = 0.0;

  bool operator==(const SonificationParams&) const = default;
};

struct AudioFrame {
  std::vector<double> samples;
  double sample_rate_hz = kAudioSampleRate;
};

inline double pitch_for(double p) {
  const auto degree = static_cast<size_t>(std::lround(std::clamp(p, 0.0, 1.0) * 14.0));
  return scale_degree_hz(degree);
}

inline double target_gain(const Decision& decision, const FeatureVector& fv) {
  if (decision.cls == DecisionClass::Neutral) return 0.0;
  return std::clamp(std::abs(fv.l_idx) / 2.0, 0.1, 1.0);
}

// Gain moves toward its target by at most kGainStep per frame; it lands on the
// target exactly once within rounding distance.
inline double fade_gain(double prev_gain, double target) {
  double next = prev_gain + std::clamp(target - prev_gain, -kGainStep, kGainStep);
  if (std::abs(next - target) < 1e-9) next = target;
  return std::clamp(next, 0.0, 1.0);
}

inline SonificationParams map_params(const Decision& decision, const FeatureVector& fv, double prev_gain) {
  return {pitch_for(decision.p_move), std::clamp(std::abs(fv.delta_hfd) / 0.5, 0.0, 1.0),
          fade_gain(prev_gain, target_gain(decision, fv))};
}

struct SynthOutput {
  AudioFrame frame;
  double phase_out = 0.0;
};

// s(t) = gain * [(1-d) sin(phase) + d tanh(3 sin(phase)) / tanh(3)], with the
// phase continued from phase_in.
inline SynthOutput synthesize(const SonificationParams& params, double duration_s, double phase_in) {
  if (!(duration_s > 0.0)) throw Error(ErrorCode::InvalidArgument, "duration must be positive");
  const auto n = static_cast<size_t>(std::nearbyint(duration_s * kAudioSampleRate));  // half to even
  const double increment = 2.0 * std::numbers::pi * params.freq_hz / kAudioSampleRate;
  const double norm = std::tanh(3.0);
  SynthOutput out;
  out.frame.samples.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const double s = std::sin(phase_in + increment * static_cast<double>(i));
    const double shaped = (1.0 - params.distortion) * s + params.distortion * std::tanh(3.0 * s) / norm;
    out.frame.samples[i] = std::clamp(params.gain * shaped, -1.0, 1.0);
  }
  out.phase_out = std::fmod(phase_in + increment * static_cast<double>(n), 2.0 * std::numbers::pi);
  return out;
}

// ---------------------------------------------------------------------------
// WAV (16-bit PCM mono)

inline int16_t to_pcm16(double s) {
  return static_cast<int16_t>(std::lround(std::clamp(s, -1.0, 1.0) * 32767.0));
}

inline std::vector<uint8_t> encode_wav(std::span<const AudioFrame> frames) {
  double rate = kAudioSampleRate;
  size_t total = 0;
  for (const auto& f : frames) {
    if (f.sample_rate_hz != frames.front().sample_rate_hz)
      throw Error(ErrorCode::InvalidArgument, "frames with mixed sample rates");
    total += f.samples.size();
  }
  if (!frames.empty()) rate = frames.front().sample_rate_hz;
  const auto sample_rate = static_cast<uint32_t>(rate);
  const auto data_bytes = static_cast<uint32_t>(total * 2);

  std::vector<uint8_t> out;
  out.reserve(44 + data_bytes);
  auto put_str = [&](const char* s) { out.insert(out.end(), s, s + 4); };
  auto put_u32 = [&](uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
  };
  auto put_u16 = [&](uint16_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xff));
    out.push_back(static_cast<uint8_t>(v >> 8));
  };
  put_str("RIFF");
  put_u32(36 + data_bytes);
  put_str("WAVE");
  put_str("fmt ");
  put_u32(16);
  put_u16(1);  // PCM
  put_u16(1);  // mono
  put_u32(sample_rate);
  put_u32(sample_rate * 2);  // byte rate
  put_u16(2);                // block align
  put_u16(16);
  put_str("data");
  put_u32(data_bytes);
  for (const auto& f : frames)
    for (const double s : f.samples) put_u16(static_cast<uint16_t>(to_pcm16(s)));
  return out;
}

inline void write_wav(std::span<const AudioFrame> frames, const std::string& path) {
  const auto bytes = encode_wav(frames);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path);
}

// Reads back what encode_wav produces (canonical 44-byte header).
inline AudioFrame decode_wav(std::span<const uint8_t> bytes) {
  auto u32 = [&](size_t at) {
    return static_cast<uint32_t>(bytes[at]) | static_cast<uint32_t>(bytes[at + 1]) << 8 |
           static_cast<uint32_t>(bytes[at + 2]) << 16 | static_cast<uint32_t>(bytes[at + 3]) << 24;
  };
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw Error(ErrorCode::IoFailure, "not a RIFF/WAVE file");
  const uint32_t data_bytes = u32(40);
  if (bytes.size() < 44 + static_cast<size_t>(data_bytes)) throw Error(ErrorCode::IoFailure, "WAV data truncated");
  AudioFrame frame;
  frame.sample_rate_hz = u32(24);
  frame.samples.reserve(data_bytes / 2);
  for (size_t i = 0; i < data_bytes / 2; ++i) {
    const auto v = static_cast<int16_t>(static_cast<uint16_t>(bytes[44 + 2 * i]) |
                                        static_cast<uint16_t>(bytes[45 + 2 * i]) << 8);
    frame.samples.push_back(static_cast<double>(v) / 32767.0);
  }
  return frame;
}

}  // namespace omnineuro
