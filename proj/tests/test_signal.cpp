#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <cstdio>
#include <cstring>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "omnineuro/chaos_engine.hpp"
#include "omnineuro/physics_engine.hpp"
#include "omnineuro/signal_io.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace omnineuro;

namespace {

// Independent EDF builder: fixed ASCII fields padded with spaces, int16 LE data.
struct RawSignal {
  std::string label;
  std::string phys_min, phys_max, dig_min, dig_max;
  int spr;
  std::vector<int16_t> data;  // all records concatenated
};

std::string pad(const std::string& s, size_t n) {
  std::string out = s.substr(0, n);
  out.resize(n, ' ');
  return out;
}

std::vector<uint8_t> build_edf(const std::vector<RawSignal>& sigs, int n_records, const std::string& duration = "1",
                               const std::string& reserved = "", const std::string& version = "0") {
  std::string h;
  const size_t ns = sigs.size();
  h += pad(version, 8) + pad("patient", 80) + pad("recording", 80) + pad("01.01.09", 8) + pad("12.00.00", 8);
  h += pad(std::to_string(256 + 256 * ns), 8) + pad(reserved, 44) + pad(std::to_string(n_records), 8);
  h += pad(duration, 8) + pad(std::to_string(ns), 4);
  for (const auto& s : sigs) h += pad(s.label, 16);
  for (size_t i = 0; i < ns; ++i) h += pad("", 80);
  for (size_t i = 0; i < ns; ++i) h += pad("uV", 8);
  for (const auto& s : sigs) h += pad(s.phys_min, 8);
  for (const auto& s : sigs) h += pad(s.phys_max, 8);
  for (const auto& s : sigs) h += pad(s.dig_min, 8);
  for (const auto& s : sigs) h += pad(s.dig_max, 8);
  for (size_t i = 0; i < ns; ++i) h += pad("", 80);
  for (const auto& s : sigs) h += pad(std::to_string(s.spr), 8);
  for (size_t i = 0; i < ns; ++i) h += pad("", 32);
  std::vector<uint8_t> out(h.begin(), h.end());
  for (int r = 0; r < n_records; ++r)
    for (const auto& s : sigs)
      for (int i = 0; i < s.spr; ++i) {
        const auto v = static_cast<uint16_t>(s.data[static_cast<size_t>(r * s.spr + i)]);
        out.push_back(static_cast<uint8_t>(v & 0xff));
        out.push_back(static_cast<uint8_t>(v >> 8));
      }
  return out;
}

// Analog Butterworth bandpass magnitude at the prewarped frequency.
double butter_bandpass_magnitude(double f, double lo, double hi, int order, double fs) {
  auto warp = [&](double hz) { return 2.0 * fs * std::tan(std::numbers::pi * hz / fs); };
  const double w = warp(f), wl = warp(lo), wh = warp(hi);
  const double x = (w * w - wl * wh) / (w * (wh - wl));
  return 1.0 / std::sqrt(1.0 + std::pow(x * x, order));
}

Recording one_channel(std::vector<double> x, double fs = 160.0) {
  Recording r;
  r.sample_rate_hz = fs;
  r.channels = {"C3"};
  r.samples = {std::move(x)};
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// EDF

TEST(Edf, MidpointDigitalValueMapsToPhysicalMidpoint) {
  const auto bytes = build_edf({{"C3", "-50", "50", "-100", "100", 4, {0, 0, 0, 0}}}, 1);
  const auto rec = parse_edf(bytes);
  ASSERT_EQ(rec.channels.size(), 1u);
  EXPECT_EQ(rec.sample_rate_hz, 4.0);
  ASSERT_EQ(rec.samples[0].size(), 4u);
  for (const double v : rec.samples[0]) EXPECT_EQ(v, 0.0);
}

TEST(Edf, LabelsAreTrimmed) {
  const auto bytes =
      build_edf({{" C3 ", "-1", "1", "-10", "10", 2, {1, 2}}, {"C4", "-1", "1", "-10", "10", 2, {3, 4}}}, 1);
  const auto rec = parse_edf(bytes);
  EXPECT_EQ(rec.channels, (std::vector<std::string>{"C3", "C4"}));
}

TEST(Edf, PhysicalScalingFollowsHeaderFields) {
  // phys = phys_min + (d - dig_min) * (phys_max - phys_min) / (dig_max - dig_min)
  const auto bytes = build_edf({{"Fz", "-200", "200", "-2048", "2047", 3, {-2048, 2047, 100}}}, 1);
  const auto rec = parse_edf(bytes);
  const double scale = 400.0 / 4095.0;
  EXPECT_DOUBLE_EQ(rec.samples[0][0], -200.0);
  EXPECT_DOUBLE_EQ(rec.samples[0][1], 200.0);
  EXPECT_DOUBLE_EQ(rec.samples[0][2], -200.0 + (100.0 + 2048.0) * scale);
}

TEST(Edf, TenHertzSineRoundTripsBitExactly) {
  const int fs = 160, records = 3;
  RawSignal sig{"C3..", "-100", "100", "-32768", "32767", fs, {}};
  std::vector<double> expected;
  const double scale = 200.0 / 65535.0;
  for (int i = 0; i < fs * records; ++i) {
    const double phys = 80.0 * std::sin(2.0 * std::numbers::pi * 10.0 * i / fs);
    const auto d = static_cast<int16_t>(std::lround((phys + 100.0) / scale - 32768.0));
    sig.data.push_back(d);
    expected.push_back(-100.0 + (double(d) + 32768.0) * scale);
  }
  const auto rec = parse_edf(build_edf({sig}, records));
  EXPECT_EQ(rec.sample_rate_hz, 160.0);
  ASSERT_EQ(rec.samples[0].size(), expected.size());
  for (size_t i = 0; i < expected.size(); ++i) ASSERT_EQ(rec.samples[0][i], expected[i]) << i;
  EXPECT_TRUE(rec.channel_index("C3").has_value());
}

TEST(Edf, RejectsBadMagic) {
  auto bytes = build_edf({{"C3", "-1", "1", "-10", "10", 2, {1, 2}}}, 1, "1", "", "1");
  try {
    parse_edf(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedHeader);
  }
  std::vector<uint8_t> tiny(100, ' ');
  EXPECT_THROW(parse_edf(tiny), Error);
}

TEST(Edf, RejectsHeaderLengthMismatch) {
  auto bytes = build_edf({{"C3", "-1", "1", "-10", "10", 2, {1, 2}}}, 1);
  std::memcpy(bytes.data() + 184, "768     ", 8);
  try {
    parse_edf(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedHeader);
  }
}

TEST(Edf, NonIntegerRecordDurationIsUnsupported) {
  const auto bytes = build_edf({{"C3", "-1", "1", "-10", "10", 2, {1, 2}}}, 1, "0.5");
  try {
    parse_edf(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnsupportedVariant);
  }
}

TEST(Edf, DiscontinuousVariantIsUnsupported) {
  const auto bytes = build_edf({{"C3", "-1", "1", "-10", "10", 2, {1, 2}}}, 1, "1", "EDF+D");
  try {
    parse_edf(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnsupportedVariant);
  }
}

TEST(Edf, TruncatedDataSection) {
  auto bytes = build_edf({{"C3", "-1", "1", "-10", "10", 4, {1, 2, 3, 4, 5, 6, 7, 8}}}, 2);
  bytes.resize(bytes.size() - 3);
  try {
    parse_edf(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TruncatedData);
  }
}

TEST(Edf, AnnotationsFromTalSignal) {
  // Two 1 s records; TALs as PhysioNet writes them.
  std::string tal0 = std::string("+0\x14\x14", 4) + '\0' + std::string("+0.5\x15" "4.2\x14T1\x14", 12) + '\0';
  std::string tal1 = std::string("+1\x14\x14", 4) + '\0' + std::string("+1.25\x15" "2\x14T0\x14", 11) + '\0';
  auto to_words = [](std::string s, size_t words) {
    s.resize(words * 2, '\0');
    std::vector<int16_t> out;
    for (size_t i = 0; i < words; ++i)
      out.push_back(static_cast<int16_t>(static_cast<uint8_t>(s[2 * i]) | static_cast<uint8_t>(s[2 * i + 1]) << 8));
    return out;
  };
  const size_t words = 16;
  auto ann = to_words(tal0, words);
  const auto ann1 = to_words(tal1, words);
  ann.insert(ann.end(), ann1.begin(), ann1.end());
  const auto bytes = build_edf({{"C3", "-1", "1", "-10", "10", 4, {1, 2, 3, 4, 5, 6, 7, 8}},
                                {"EDF Annotations", "-1", "1", "-32768", "32767", int(words), ann}},
                               2, "1", "EDF+C");
  const auto rec = parse_edf(bytes);
  EXPECT_EQ(rec.channels, std::vector<std::string>{"C3"});
  EXPECT_EQ(rec.samples[0].size(), 8u);
  ASSERT_EQ(rec.annotations.size(), 2u);
  EXPECT_DOUBLE_EQ(rec.annotations[0].onset_s, 0.5);
  EXPECT_DOUBLE_EQ(rec.annotations[0].duration_s, 4.2);
  EXPECT_EQ(rec.annotations[0].label, "T1");
  EXPECT_DOUBLE_EQ(rec.annotations[1].onset_s, 1.25);
  EXPECT_EQ(rec.annotations[1].label, "T0");
}

TEST(Edf, WriterRoundTripIsLosslessAtQuantizationResolution) {
  Recording rec;
  rec.sample_rate_hz = 160.0;
  rec.channels = {"C3", "C4", "Cz"};
  for (uint64_t c = 0; c < 3; ++c) rec.samples.push_back(fixtures::white_noise(160 * 4, c + 11, 20.0));
  rec.annotations = {{0.0, 2.0, "T0"}, {2.0, 1.5, "T2"}};
  const auto back = parse_edf(write_edf(rec));
  EXPECT_EQ(back.channels, rec.channels);
  EXPECT_EQ(back.annotations.size(), 2u);
  EXPECT_EQ(back.annotations[1].label, "T2");
  EXPECT_DOUBLE_EQ(back.annotations[1].onset_s, 2.0);
  for (size_t c = 0; c < 3; ++c) {
    const auto [lo, hi] = std::minmax_element(rec.samples[c].begin(), rec.samples[c].end());
    const double resolution = (std::max(*hi, 0.0) - std::min(*lo, 0.0) + 0.002) / 65535.0;
    for (size_t i = 0; i < rec.n_samples(); ++i)
      ASSERT_LE(std::fabs(back.samples[c][i] - rec.samples[c][i]), resolution) << c << "," << i;
  }
}

TEST(Labels, PhysionetEventCodes) {
  EXPECT_EQ(trial_label_from_string("T1"), TrialLabel::Left);
  EXPECT_EQ(trial_label_from_string("T2"), TrialLabel::Right);
  EXPECT_EQ(trial_label_from_string("T0"), TrialLabel::Rest);
  EXPECT_FALSE(trial_label_from_string("boundary").has_value());
  EXPECT_EQ(canonical_channel("C3.."), "C3");
  EXPECT_EQ(canonical_channel("Fcz."), "FCZ");
}

// ---------------------------------------------------------------------------
// CSV

TEST(Csv, TwoByTwo) {
  const auto rec = parse_csv("C3,C4\n1.0,2.0\n3.0,4.0", 160.0);
  EXPECT_EQ(rec.channels, (std::vector<std::string>{"C3", "C4"}));
  EXPECT_EQ(rec.samples, (std::vector<std::vector<double>>{{1.0, 3.0}, {2.0, 4.0}}));
  EXPECT_TRUE(rec.annotations.empty());
  EXPECT_EQ(rec.sample_rate_hz, 160.0);
}

TEST(Csv, HeaderOnlyIsEmptyRecording) {
  const auto rec = parse_csv("C3,C4\n", 160.0);
  EXPECT_EQ(rec.channels.size(), 2u);
  EXPECT_EQ(rec.n_samples(), 0u);
}

TEST(Csv, SixtyFourColumnsTranspose) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-100, 100);
  std::vector<std::vector<double>> rows(320, std::vector<double>(64));
  std::string text;
  for (int c = 0; c < 64; ++c) text += (c ? ",ch" : "ch") + std::to_string(c);
  text += "\n";
  char buf[40];
  for (auto& row : rows) {
    for (int c = 0; c < 64; ++c) {
      row[c] = u(rng);
      std::snprintf(buf, sizeof buf, "%.17g", row[c]);
      text += (c ? "," : "") + std::string(buf);
    }
    text += "\n";
  }
  const auto rec = parse_csv(text, 160.0);
  ASSERT_EQ(rec.samples.size(), 64u);
  for (size_t c = 0; c < 64; ++c)
    for (size_t i = 0; i < 320; ++i) ASSERT_EQ(rec.samples[c][i], rows[i][c]);
}

TEST(Csv, RaggedAndNonNumeric) {
  try {
    parse_csv("C3,C4\n1,2\n3\n", 160.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RaggedRows);
  }
  try {
    parse_csv("C3,C4\n1,abc\n", 160.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonNumericCell);
  }
}

TEST(Csv, WriterRoundTrip) {
  Recording rec;
  rec.sample_rate_hz = 128.0;
  rec.channels = {"C3", "C4"};
  rec.samples = {fixtures::white_noise(50, 1), fixtures::white_noise(50, 2)};
  EXPECT_EQ(parse_csv(to_csv(rec), 128.0), rec);
}

// ---------------------------------------------------------------------------
// Bandpass

TEST(Bandpass, MagnitudeMatchesAnalogButterworthOracle) {
  const FilterSpec spec{8.0, 30.0, 4, FilterMode::Causal};
  const auto sections = design_butter_bandpass(spec, 160.0);
  EXPECT_EQ(sections.size(), 4u);
  for (double f = 0.5; f < 80.0; f += 0.5) {
    const double got = std::abs(frequency_response(sections, f, 160.0));
    EXPECT_NEAR(got, butter_bandpass_magnitude(f, 8.0, 30.0, 4, 160.0), 1e-9) << f;
  }
  EXPECT_NEAR(std::abs(frequency_response(sections, 8.0, 160.0)), std::sqrt(0.5), 1e-9);
  EXPECT_NEAR(std::abs(frequency_response(sections, 30.0, 160.0)), std::sqrt(0.5), 1e-9);
}

TEST(Bandpass, TwentyHertzPassesWithinFivePercent) {
  const auto x = fixtures::sine(160 * 10, 20.0, 160.0, 10.0);
  const auto y = bandpass(one_channel(x), {8.0, 30.0, 4, FilterMode::Causal}).samples[0];
  const double gain = std::abs(frequency_response(design_butter_bandpass({8.0, 30.0, 4}, 160.0), 20.0, 160.0));
  const double ratio = fixtures::rms(y, 320) / fixtures::rms(x, 320);
  EXPECT_NEAR(ratio, gain, 0.01);
  EXPECT_NEAR(ratio, 1.0, 0.05);
}

TEST(Bandpass, TwoHertzIsAttenuated) {
  const auto x = fixtures::sine(160 * 10, 2.0, 160.0, 10.0);
  for (const auto mode : {FilterMode::Causal, FilterMode::ZeroPhase}) {
    const auto y = bandpass(one_channel(x), {8.0, 30.0, 4, mode}).samples[0];
    EXPECT_LT(fixtures::rms(y, 320), 0.1 * fixtures::rms(x, 320));
  }
}

TEST(Bandpass, ZeroInZeroOut) {
  for (const auto mode : {FilterMode::Causal, FilterMode::ZeroPhase}) {
    const auto y = bandpass(one_channel(std::vector<double>(500, 0.0)), {8.0, 30.0, 4, mode}).samples[0];
    EXPECT_EQ(y.size(), 500u);
    for (const double v : y) ASSERT_EQ(v, 0.0);
  }
}

TEST(Bandpass, LinearityProperty) {
  const auto x = fixtures::white_noise(1000, 3, 5.0);
  const auto z = fixtures::white_noise(1000, 4, 5.0);
  const double a = 1.7, b = -0.3;
  std::vector<double> mix(1000);
  for (size_t i = 0; i < mix.size(); ++i) mix[i] = a * x[i] + b * z[i];
  for (const auto mode : {FilterMode::Causal, FilterMode::ZeroPhase}) {
    const FilterSpec spec{8.0, 30.0, 4, mode};
    const auto fx = bandpass(one_channel(x), spec).samples[0];
    const auto fz = bandpass(one_channel(z), spec).samples[0];
    const auto fm = bandpass(one_channel(mix), spec).samples[0];
    double worst = 0.0, scale = 0.0;
    for (size_t i = 0; i < mix.size(); ++i) {
      worst = std::max(worst, std::fabs(fm[i] - (a * fx[i] + b * fz[i])));
      scale = std::max(scale, std::fabs(fm[i]));
    }
    EXPECT_LE(worst, 1e-9 * scale);
  }
}

TEST(Bandpass, ZeroPhaseHasNoLagCausalDoes) {
  const auto x = fixtures::sine(160 * 8, 15.0, 160.0);
  const auto zp = bandpass(one_channel(x), {8.0, 30.0, 4, FilterMode::ZeroPhase}).samples[0];
  const auto causal = bandpass(one_channel(x), {8.0, 30.0, 4, FilterMode::Causal}).samples[0];
  double err_zp = 0.0, err_causal = 0.0;
  for (size_t i = 400; i < 900; ++i) {
    err_zp = std::max(err_zp, std::fabs(zp[i] - x[i]));
    err_causal = std::max(err_causal, std::fabs(causal[i] - x[i]));
  }
  EXPECT_LT(err_zp, 0.05);
  EXPECT_GT(err_causal, 0.2);
}

TEST(Bandpass, StreamingCascadeEqualsOneShot) {
  const auto x = fixtures::white_noise(777, 9);
  const auto sections = design_butter_bandpass({8.0, 30.0, 4}, 160.0);
  BiquadCascade whole(sections), chunked(sections);
  auto a = x, b = x;
  whole.process(a);
  for (size_t pos = 0; pos < b.size(); pos += 20)
    chunked.process(std::span<double>(b).subspan(pos, std::min<size_t>(20, b.size() - pos)));
  EXPECT_EQ(a, b);
}

TEST(Bandpass, DesignErrors) {
  try {
    design_butter_bandpass({8.0, 80.0, 4}, 160.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnstableDesign);
  }
  EXPECT_THROW(design_butter_bandpass({30.0, 8.0, 4}, 160.0), Error);
  EXPECT_THROW(design_butter_bandpass({8.0, 30.0, 0}, 160.0), Error);
}

// ---------------------------------------------------------------------------
// Epoching

TEST(Epochs, TenSecondsGiveSeventyThreeWindows) {
  Recording rec;
  rec.sample_rate_hz = 160.0;
  rec.channels = {"C3", "C4"};
  rec.samples.assign(2, std::vector<double>(1600, 1.0));
  const auto w = epoch_stream(rec, 1.0, 0.125, {"C3", "C4"});
  ASSERT_EQ(w.size(), 73u);
  EXPECT_DOUBLE_EQ(w[1].start_s, 0.125);
  EXPECT_DOUBLE_EQ(w.back().start_s, 9.0);
  for (const auto& e : w) EXPECT_EQ(e.n_samples(), 160u);
}

TEST(Epochs, CountFormulaProperty) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<size_t> len(1, 2000), win(1, 400), hop(1, 100);
  for (int t = 0; t < 500; ++t) {
    const size_t n = len(rng), w = win(rng), h = hop(rng);
    size_t brute = 0;
    for (size_t s = 0; s + w <= n; s += h) ++brute;
    ASSERT_EQ(epoch_count(n, w, h), brute) << n << " " << w << " " << h;
  }
}

TEST(Epochs, WindowEqualToDurationGivesOne) {
  Recording rec;
  rec.sample_rate_hz = 160.0;
  rec.channels = {"C3", "C4"};
  rec.samples.assign(2, std::vector<double>(320, 0.0));
  EXPECT_EQ(epoch_stream(rec, 2.0, 0.125, {}).size(), 1u);
}

TEST(Epochs, MissingPick) {
  Recording rec;
  rec.sample_rate_hz = 160.0;
  rec.channels = {"C3", "C4"};
  rec.samples.assign(2, std::vector<double>(320, 0.0));
  try {
    epoch_stream(rec, 1.0, 0.125, {"Cz"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingChannel);
  }
}

TEST(Epochs, LabelsFromAnnotationCoveringCentre) {
  Recording rec;
  rec.sample_rate_hz = 160.0;
  rec.channels = {"C3", "C4"};
  rec.samples.assign(2, std::vector<double>(160 * 6, 0.0));
  rec.annotations = {{0.0, 2.0, "T0"}, {2.0, 4.0, "T2"}};
  const auto w = epoch_stream(rec, 1.0, 0.5, {"C3", "C4"});
  EXPECT_EQ(w[0].label, TrialLabel::Rest);   // centre 0.5
  EXPECT_EQ(w[2].label, TrialLabel::Rest);   // centre 1.5, still T0
  EXPECT_EQ(w[3].label, TrialLabel::Right);  // centre 2.0, cue onset is inclusive
  EXPECT_EQ(w.back().label, TrialLabel::Right);
}

TEST(Epochs, CueWindowsUseOffsetAndLength) {
  Recording rec;
  rec.sample_rate_hz = 160.0;
  rec.channels = {"C3", "C4"};
  rec.samples.assign(2, std::vector<double>(160 * 10, 0.0));
  for (size_t i = 0; i < rec.n_samples(); ++i) rec.samples[0][i] = double(i);
  rec.annotations = {{0.0, 2.0, "T0"}, {2.0, 4.0, "T1"}, {6.0, 4.0, "T2"}, {9.0, 1.0, "T1"}};
  const auto w = cue_epochs(rec, 0.5, 2.0, {});
  ASSERT_EQ(w.size(), 2u);  // the last cue runs past the end
  EXPECT_EQ(w[0].label, TrialLabel::Left);
  EXPECT_EQ(w[1].label, TrialLabel::Right);
  EXPECT_EQ(w[0].data[0].front(), 400.0);
  EXPECT_EQ(w[0].n_samples(), 320u);
}

// ---------------------------------------------------------------------------
// Energy lateralization

TEST(LIdx, IdenticalChannelsGiveExactZero) {
  const auto x = fixtures::white_noise(160, 1);
  EXPECT_EQ(compute_l_idx(fixtures::two_channel(x, x), {}), 0.0);
}

TEST(LIdx, DoubledC4GivesLnFour) {
  const auto x = fixtures::white_noise(4000, 2);
  std::vector<double> y(x.size());
  for (size_t i = 0; i < x.size(); ++i) y[i] = 2.0 * x[i];
  EXPECT_NEAR(compute_l_idx(fixtures::two_channel(x, y), {1e-10}), std::log(4.0), 1e-9);
}

TEST(LIdx, ConstantChannelsGiveZero) {
  EXPECT_EQ(compute_l_idx(fixtures::two_channel(std::vector<double>(160, 3.0), std::vector<double>(160, -7.0)), {}), 0.0);
}

TEST(LIdx, AntisymmetryIsExact) {
  for (uint64_t s = 0; s < 50; ++s) {
    const auto a = fixtures::white_noise(160, 100 + s, 1.0 + double(s));
    const auto b = fixtures::white_noise(160, 200 + s, 3.0);
    EXPECT_EQ(compute_l_idx(fixtures::two_channel(a, b), {}), -compute_l_idx(fixtures::two_channel(b, a), {}));
  }
}

TEST(LIdx, ScaleCovariance) {
  const auto a = fixtures::white_noise(160, 3, 2.0);
  const auto b = fixtures::white_noise(160, 4, 5.0);
  const double base = compute_l_idx(fixtures::two_channel(a, b), {});
  for (const double c : {-3.0, 0.01, 7.5, 1e3}) {
    auto sa = a, sb = b;
    for (auto& v : sa) v *= c;
    for (auto& v : sb) v *= c;
    EXPECT_LT(std::fabs(compute_l_idx(fixtures::two_channel(sa, sb), {}) - base), 1e-6) << c;
  }
}

TEST(LIdx, FiniteForFiniteInputs) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> expo(-12, 100);
  for (int t = 0; t < 200; ++t) {
    auto a = fixtures::white_noise(64, rng(), std::pow(10.0, expo(rng)));
    auto b = fixtures::white_noise(64, rng(), std::pow(10.0, expo(rng)));
    if (t % 7 == 0) a.assign(64, 1.0);
    EXPECT_TRUE(std::isfinite(compute_l_idx(fixtures::two_channel(a, b), {})));
  }
}

TEST(LIdx, MissingChannel) {
  EpochWindow w;
  w.channels = {"C3", "Cz"};
  w.data = {{1, 2}, {3, 4}};
  w.sample_rate_hz = 160.0;
  try {
    compute_l_idx(w, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingChannel);
  }
}

// ---------------------------------------------------------------------------
// Higuchi

TEST(Higuchi, LineHasDimensionOne) {
  std::vector<double> x(1000);
  for (size_t i = 0; i < x.size(); ++i) x[i] = double(i + 1);
  const double hfd = higuchi_hfd(x, {10});
  EXPECT_GE(hfd, 0.99);
  EXPECT_LE(hfd, 1.01);
  EXPECT_NEAR(hfd, oracles::naive_hfd(x, 10), 1e-9);
}

TEST(Higuchi, WhiteNoiseNearTwo) {
  const auto x = fixtures::white_noise(4096, 12345);
  const double hfd = higuchi_hfd(x, {10});
  EXPECT_GE(hfd, 1.9);
  EXPECT_LE(hfd, 2.05);
  EXPECT_NEAR(hfd, oracles::naive_hfd(x, 10), 1e-9);
}

TEST(Higuchi, ConstantIsDegenerate) {
  try {
    higuchi_hfd(std::vector<double>(100, 4.2), {10});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateSeries);
  }
}

TEST(Higuchi, TooShort) {
  try {
    higuchi_hfd(std::vector<double>(21, 1.0), {10});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SeriesTooShort);
  }
  EXPECT_NO_THROW(higuchi_hfd(fixtures::white_noise(22, 1), {10}));
}

TEST(Higuchi, AmplitudeInvariance) {
  const auto x = fixtures::white_noise(512, 77);
  const double base = higuchi_hfd(x, {10});
  for (const double c : {-1.0, 0.001, 3.3, 1e6}) {
    auto y = x;
    for (auto& v : y) v *= c;
    EXPECT_NEAR(higuchi_hfd(y, {10}), base, 1e-9) << c;
  }
}

TEST(Higuchi, ComplexityOrdering) {
  std::vector<double> line(4096);
  for (size_t i = 0; i < line.size(); ++i) line[i] = double(i);
  const auto s = fixtures::sine(4096, 10.0, 160.0);
  const auto noise = fixtures::white_noise(4096, 3);
  const double h_line = higuchi_hfd(line, {10}), h_sine = higuchi_hfd(s, {10}), h_noise = higuchi_hfd(noise, {10});
  EXPECT_LT(h_line, h_sine);
  EXPECT_LT(h_sine, h_noise);
}

TEST(Higuchi, AgreesWithNaiveReferenceOnRandomSeries) {
  std::mt19937_64 rng(2024);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> x(512);
    std::normal_distribution<double> g(0.0, 1.0);
    double walk = 0.0;
    const double mix = double(t % 5) / 4.0;  // from white noise to a random walk
    for (auto& v : x) {
      const double e = g(rng);
      walk += e;
      v = mix * walk + (1.0 - mix) * e;
    }
    ASSERT_NEAR(higuchi_hfd(x, {10}), oracles::naive_hfd(x, 10), 1e-9) << t;
  }
}

TEST(DeltaHfd, IdenticalChannelsExactZero) {
  const auto x = fixtures::white_noise(160, 5);
  EXPECT_EQ(delta_hfd(fixtures::two_channel(x, x), {}), 0.0);
}

TEST(DeltaHfd, NoiseMinusSineIsPositiveAndMatchesOracle) {
  const auto noise = fixtures::white_noise(160, 6);
  const auto s = fixtures::sine(160, 10.0, 160.0);
  const double d = delta_hfd(fixtures::two_channel(noise, s), {10});
  EXPECT_GT(d, 0.0);
  EXPECT_NEAR(d, oracles::naive_hfd(noise, 10) - oracles::naive_hfd(s, 10), 1e-9);
  EXPECT_EQ(delta_hfd(fixtures::two_channel(s, noise), {10}), -d);
}
