#pragma once

// Small fixture builders shared by the test binaries.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "omnineuro/signal_io.hpp"

namespace fixtures {

inline std::vector<double> white_noise(size_t n, uint64_t seed, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sd);
  std::vector<double> x(n);
  for (auto& v : x) v = g(rng);
  return x;
}

inline std::vector<double> sine(size_t n, double freq_hz, double fs, double amp = 1.0, double phase = 0.0) {
  std::vector<double> x(n);
  for (size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2.0 * std::numbers::pi * freq_hz * double(i) / fs + phase);
  return x;
}

inline omnineuro::EpochWindow two_channel(std::vector<double> c3, std::vector<double> c4, double fs = 160.0) {
  omnineuro::EpochWindow w;
  w.channels = {"C3", "C4"};
  w.data = {std::move(c3), std::move(c4)};
  w.sample_rate_hz = fs;
  return w;
}

inline double rms(const std::vector<double>& x, size_t from = 0) {
  double s = 0.0;
  for (size_t i = from; i < x.size(); ++i) s += x[i] * x[i];
  return std::sqrt(s / double(x.size() - from));
}

}  // namespace fixtures
