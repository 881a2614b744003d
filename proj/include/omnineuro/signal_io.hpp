#pragma once

// EEG ingestion: EDF/EDF+ subset and CSV readers, Butterworth bandpass
// (streaming and zero-phase), and sliding-window epoching.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "omnineuro/error.hpp"

namespace omnineuro {

enum class TrialLabel { Left, Right, Rest };

constexpr std::string_view to_string(TrialLabel label) {
  switch (label) {
    case TrialLabel::Left: return "Left";
    case TrialLabel::Right: return "Right";
    case TrialLabel::Rest: return "Rest";
  }
  return "Rest";
}

// Accepts literal class names and the PhysioNet eegmmidb event codes.
inline std::optional<TrialLabel> trial_label_from_string(std::string_view text) {
  if (text == "Left" || text == "left" || text == "T1") return TrialLabel::Left;
  if (text == "Right" || text == "right" || text == "T2") return TrialLabel::Right;
  if (text == "Rest" || text == "rest" || text == "T0") return TrialLabel::Rest;
  return std::nullopt;
}

inline std::string trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\0'; };
  size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

// Label used for channel lookups: whitespace and trailing '.' padding removed,
// upper-cased ("C3.." and "c3" both match "C3").
inline std::string canonical_channel(std::string_view label) {
  std::string out = trim(label);
  while (!out.empty() && out.back() == '.') out.pop_back();
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

struct Annotation {
  double onset_s = 0.0;
  double duration_s = 0.0;
  std::string label;

  bool operator==(const Annotation&) const = default;
};

struct Recording {
  double sample_rate_hz = 0.0;
  std::vector<std::string> channels;
  std::vector<std::vector<double>> samples;  // [channel][sample], microvolts
  std::vector<Annotation> annotations;

  size_t n_samples() const { return samples.empty() ? 0 : samples.front().size(); }
  double duration_s() const { return sample_rate_hz > 0 ? static_cast<double>(n_samples()) / sample_rate_hz : 0.0; }

  std::optional<size_t> channel_index(std::string_view name) const {
    const auto key = canonical_channel(name);
    for (size_t i = 0; i < channels.size(); ++i)
      if (canonical_channel(channels[i]) == key) return i;
    return std::nullopt;
  }

  void validate() const {
    if (!(sample_rate_hz > 0.0)) throw Error(ErrorCode::InvalidArgument, "sample rate must be positive");
    if (samples.size() != channels.size()) throw Error(ErrorCode::InvalidArgument, "channel count mismatch");
    for (const auto& row : samples)
      if (row.size() != n_samples()) throw Error(ErrorCode::InvalidArgument, "channel rows differ in length");
  }

  bool operator==(const Recording&) const = default;
};

struct EpochWindow {
  double start_s = 0.0;
  std::vector<std::string> channels;
  std::vector<std::vector<double>> data;  // [channel][sample]
  double sample_rate_hz = 0.0;
  std::optional<TrialLabel> label;

  size_t n_channels() const { return data.size(); }
  size_t n_samples() const { return data.empty() ? 0 : data.front().size(); }

  std::optional<size_t> channel_index(std::string_view name) const {
    const auto key = canonical_channel(name);
    for (size_t i = 0; i < channels.size(); ++i)
      if (canonical_channel(channels[i]) == key) return i;
    return std::nullopt;
  }

  std::span<const double> channel(std::string_view name) const {
    const auto idx = channel_index(name);
    if (!idx) throw Error(ErrorCode::MissingChannel, std::string(name));
    return data[*idx];
  }
};

// ---------------------------------------------------------------------------
// EDF

namespace edf_detail {

inline std::string field(std::span<const uint8_t> bytes, size_t offset, size_t len) {
  return trim(std::string_view(reinterpret_cast<const char*>(bytes.data()) + offset, len));
}

inline double number(std::span<const uint8_t> bytes, size_t offset, size_t len, const char* what) {
  const auto text = field(bytes, offset, len);
  double value = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (text.empty() || ec != std::errc() || ptr != last)
    throw Error(ErrorCode::MalformedHeader, std::string("bad numeric field '") + what + "': '" + text + "'");
  return value;
}

inline void put_field(std::string& header, std::string_view value, size_t len) {
  std::string v(value.substr(0, len));
  v.resize(len, ' ');
  header += v;
}

inline std::string fmt_number(double v, size_t len) {
  // EDF numeric fields are at most 8 ASCII characters.
  for (int precision = 8; precision >= 0; --precision) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    std::string s(buf);
    if (s.find('.') != std::string::npos) {
      while (!s.empty() && s.back() == '0') s.pop_back();
      if (!s.empty() && s.back() == '.') s.pop_back();
    }
    if (s.size() <= len) return s;
  }
  throw Error(ErrorCode::InvalidArgument, "value does not fit an EDF header field");
}

// Parses the Time-stamped Annotation Lists of one data record.
inline void parse_tals(std::span<const uint8_t> raw, std::vector<Annotation>& out) {
  size_t i = 0;
  while (i < raw.size()) {
    if (raw[i] == 0) { ++i; continue; }
    size_t end = i;
    while (end < raw.size() && raw[end] != 0) ++end;
    const std::string tal(reinterpret_cast<const char*>(raw.data()) + i, end - i);
    i = end;
    const auto first20 = tal.find('\x14');
    if (first20 == std::string::npos) continue;
    std::string timing = tal.substr(0, first20);
    double duration = 0.0;
    if (const auto p21 = timing.find('\x15'); p21 != std::string::npos) {
      duration = std::strtod(timing.c_str() + p21 + 1, nullptr);
      timing.resize(p21);
    }
    const double onset = std::strtod(timing.c_str(), nullptr);
    size_t pos = first20 + 1;
    while (pos < tal.size()) {
      const auto next = tal.find('\x14', pos);
      const auto text = tal.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
      if (!text.empty()) out.push_back({onset, duration, text});
      if (next == std::string::npos) break;
      pos = next + 1;
    }
  }
}

}  // namespace edf_detail

inline Recording parse_edf(std::span<const uint8_t> bytes) {
  using namespace edf_detail;
  if (bytes.size() < 256) throw Error(ErrorCode::MalformedHeader, "file shorter than the 256-byte fixed header");
  if (field(bytes, 0, 8) != "0") throw Error(ErrorCode::MalformedHeader, "version field is not '0'");

  const auto header_bytes = static_cast<long>(number(bytes, 184, 8, "header bytes"));
  const auto reserved = field(bytes, 192, 44);
  auto n_records = static_cast<long>(number(bytes, 236, 8, "number of records"));
  const double record_duration = number(bytes, 244, 8, "record duration");
  const auto ns = static_cast<long>(number(bytes, 252, 4, "number of signals"));

  if (reserved.rfind("EDF+D", 0) == 0) throw Error(ErrorCode::UnsupportedVariant, "discontinuous EDF+D");
  if (ns <= 0) throw Error(ErrorCode::MalformedHeader, "no signals");
  if (header_bytes != 256 + 256 * ns) throw Error(ErrorCode::MalformedHeader, "header byte count does not match signal count");
  if (bytes.size() < static_cast<size_t>(header_bytes)) throw Error(ErrorCode::MalformedHeader, "signal headers truncated");
  if (!(record_duration > 0.0) || record_duration != std::floor(record_duration))
    throw Error(ErrorCode::UnsupportedVariant, "record duration must be a positive integer number of seconds");

  struct Signal {
    std::string label;
    double phys_min, phys_max, dig_min, dig_max;
    long samples_per_record;
  };
  std::vector<Signal> signals(static_cast<size_t>(ns));
  const size_t base = 256;
  const auto n = static_cast<size_t>(ns);
  for (size_t s = 0; s < n; ++s) {
    auto& sig = signals[s];
    sig.label = field(bytes, base + s * 16, 16);
    sig.phys_min = number(bytes, base + n * 104 + s * 8, 8, "physical minimum");
    sig.phys_max = number(bytes, base + n * 112 + s * 8, 8, "physical maximum");
    sig.dig_min = number(bytes, base + n * 120 + s * 8, 8, "digital minimum");
    sig.dig_max = number(bytes, base + n * 128 + s * 8, 8, "digital maximum");
    sig.samples_per_record = static_cast<long>(number(bytes, base + n * 216 + s * 8, 8, "samples per record"));
    if (sig.samples_per_record <= 0) throw Error(ErrorCode::MalformedHeader, "non-positive samples per record");
    if (sig.dig_max <= sig.dig_min) throw Error(ErrorCode::MalformedHeader, "digital range is empty");
  }

  size_t record_bytes = 0;
  for (const auto& sig : signals) record_bytes += 2 * static_cast<size_t>(sig.samples_per_record);
  const size_t available = bytes.size() - static_cast<size_t>(header_bytes);
  if (n_records < 0) n_records = static_cast<long>(available / record_bytes);
  if (available < static_cast<size_t>(n_records) * record_bytes)
    throw Error(ErrorCode::TruncatedData, "data section shorter than the declared record count");

  Recording rec;
  std::optional<long> spr;
  std::vector<size_t> data_signals;
  for (size_t s = 0; s < n; ++s) {
    if (signals[s].label == "EDF Annotations") continue;
    if (spr && *spr != signals[s].samples_per_record)
      throw Error(ErrorCode::UnsupportedVariant, "data signals with different sampling rates");
    spr = signals[s].samples_per_record;
    data_signals.push_back(s);
    rec.channels.push_back(signals[s].label);
  }
  rec.sample_rate_hz = spr ? static_cast<double>(*spr) / record_duration : 1.0;
  rec.samples.assign(data_signals.size(), {});
  for (auto& row : rec.samples) row.reserve(static_cast<size_t>(n_records * spr.value_or(0)));

  size_t offset = static_cast<size_t>(header_bytes);
  for (long r = 0; r < n_records; ++r) {
    size_t data_slot = 0;
    for (size_t s = 0; s < n; ++s) {
      const auto& sig = signals[s];
      const auto count = static_cast<size_t>(sig.samples_per_record);
      const auto chunk = bytes.subspan(offset, 2 * count);
      offset += 2 * count;
      if (sig.label == "EDF Annotations") {
        parse_tals(chunk, rec.annotations);
        continue;
      }
      const double scale = (sig.phys_max - sig.phys_min) / (sig.dig_max - sig.dig_min);
      auto& row = rec.samples[data_slot++];
      for (size_t i = 0; i < count; ++i) {
        const auto digital = static_cast<int16_t>(static_cast<uint16_t>(chunk[2 * i]) |
                                                  static_cast<uint16_t>(chunk[2 * i + 1]) << 8);
        row.push_back(sig.phys_min + (static_cast<double>(digital) - sig.dig_min) * scale);
      }
    }
  }
  return rec;
}

inline std::vector<uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Recording read_edf(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  return parse_edf(bytes);
}

// One signal as stored in an EDF file: explicit scaling and digital samples.
struct EdfSignal {
  std::string label;
  double phys_min = -32768.0;
  double phys_max = 32767.0;
  int dig_min = -32768;
  int dig_max = 32767;
  std::vector<int16_t> digital;
};

// Low-level writer used for fixtures. Every signal holds samples_per_record *
// n_records digital values; record duration is one second.
inline std::vector<uint8_t> write_edf_signals(const std::vector<EdfSignal>& signals, long samples_per_record,
                                              const std::vector<Annotation>& annotations = {}) {
  using namespace edf_detail;
  if (signals.empty() || samples_per_record <= 0) throw Error(ErrorCode::InvalidArgument, "nothing to write");
  const size_t total = signals.front().digital.size();
  for (const auto& s : signals)
    if (s.digital.size() != total) throw Error(ErrorCode::InvalidArgument, "signals differ in length");
  if (total % static_cast<size_t>(samples_per_record) != 0)
    throw Error(ErrorCode::InvalidArgument, "length is not a whole number of records");
  const long n_records = static_cast<long>(total / static_cast<size_t>(samples_per_record));

  // Per-record TAL payloads: the time-keeping TAL, then events with onset in the record.
  std::vector<std::string> tals;
  const bool with_annotations = !annotations.empty();
  if (with_annotations) {
    for (long r = 0; r < n_records; ++r) {
      std::string tal = "+" + fmt_number(static_cast<double>(r), 16) + "\x14\x14";
      tal.push_back('\0');
      for (const auto& a : annotations) {
        const long rec_index = std::min(n_records - 1, static_cast<long>(std::floor(a.onset_s)));
        if (rec_index != r) continue;
        char buf[64];
        std::snprintf(buf, sizeof buf, "%+.6f", a.onset_s);
        std::string onset(buf);
        std::snprintf(buf, sizeof buf, "%.6f", a.duration_s);
        tal += onset + "\x15" + buf + "\x14" + a.label + "\x14";
        tal.push_back('\0');
      }
      tals.push_back(std::move(tal));
    }
  }
  size_t ann_samples = 0;
  for (const auto& t : tals) ann_samples = std::max(ann_samples, (t.size() + 1) / 2);

  const size_t ns = signals.size() + (with_annotations ? 1 : 0);
  std::string header;
  put_field(header, "0", 8);
  put_field(header, "X X X X", 80);
  put_field(header, "Startdate X X X X", 80);
  put_field(header, "01.01.00", 8);
  put_field(header, "00.00.00", 8);
  put_field(header, std::to_string(256 + 256 * ns), 8);
  put_field(header, with_annotations ? "EDF+C" : "", 44);
  put_field(header, std::to_string(n_records), 8);
  put_field(header, "1", 8);
  put_field(header, std::to_string(ns), 4);

  auto each = [&](auto&& data_fn, auto&& ann_value, size_t len) {
    for (const auto& s : signals) put_field(header, data_fn(s), len);
    if (with_annotations) put_field(header, ann_value, len);
  };
  each([](const EdfSignal& s) { return s.label; }, "EDF Annotations", 16);
  each([](const EdfSignal&) { return std::string("AgAgCl electrode"); }, "", 80);
  each([](const EdfSignal&) { return std::string("uV"); }, "", 8);
  each([](const EdfSignal& s) { return fmt_number(s.phys_min, 8); }, "-1", 8);
  each([](const EdfSignal& s) { return fmt_number(s.phys_max, 8); }, "1", 8);
  each([](const EdfSignal& s) { return std::to_string(s.dig_min); }, "-32768", 8);
  each([](const EdfSignal& s) { return std::to_string(s.dig_max); }, "32767", 8);
  each([](const EdfSignal&) { return std::string(); }, "", 80);
  each([&](const EdfSignal&) { return std::to_string(samples_per_record); }, std::to_string(ann_samples), 8);
  each([](const EdfSignal&) { return std::string(); }, "", 32);

  std::vector<uint8_t> out(header.begin(), header.end());
  const auto spr = static_cast<size_t>(samples_per_record);
  for (long r = 0; r < n_records; ++r) {
    for (const auto& s : signals) {
      for (size_t i = 0; i < spr; ++i) {
        const auto v = static_cast<uint16_t>(s.digital[static_cast<size_t>(r) * spr + i]);
        out.push_back(static_cast<uint8_t>(v & 0xff));
        out.push_back(static_cast<uint8_t>(v >> 8));
      }
    }
    if (with_annotations) {
      std::string payload = tals[static_cast<size_t>(r)];
      payload.resize(2 * ann_samples, '\0');
      out.insert(out.end(), payload.begin(), payload.end());
    }
  }
  return out;
}

// Quantizes a recording to 16 bits per channel using each channel's own
// physical range. Sample rate must be an integer; the tail is zero-padded to a
// whole record.
inline std::vector<uint8_t> write_edf(const Recording& rec) {
  rec.validate();
  const double spr_real = rec.sample_rate_hz;
  if (spr_real != std::floor(spr_real)) throw Error(ErrorCode::InvalidArgument, "EDF writer needs an integer sample rate");
  const auto spr = static_cast<size_t>(spr_real);
  const size_t n = rec.n_samples();
  const size_t padded = std::max<size_t>(spr, (n + spr - 1) / spr * spr);

  std::vector<EdfSignal> signals;
  for (size_t c = 0; c < rec.channels.size(); ++c) {
    const auto& row = rec.samples[c];
    double lo = row.empty() ? -1.0 : *std::min_element(row.begin(), row.end());
    double hi = row.empty() ? 1.0 : *std::max_element(row.begin(), row.end());
    lo = std::min(lo, 0.0);
    hi = std::max(hi, 0.0);
    if (hi - lo < 1e-6) { lo -= 1.0; hi += 1.0; }
    // Round the range outward to what the 8-character header can hold.
    lo = std::stod(edf_detail::fmt_number(std::floor(lo * 1000.0) / 1000.0, 8));
    hi = std::stod(edf_detail::fmt_number(std::ceil(hi * 1000.0) / 1000.0, 8));
    EdfSignal sig{rec.channels[c], lo, hi, -32768, 32767, {}};
    const double scale = (sig.dig_max - sig.dig_min) / (hi - lo);
    sig.digital.resize(padded);
    for (size_t i = 0; i < padded; ++i) {
      const double x = i < n ? row[i] : 0.0;
      const double d = std::round((x - lo) * scale + sig.dig_min);
      sig.digital[i] = static_cast<int16_t>(std::clamp(d, -32768.0, 32767.0));
    }
    signals.push_back(std::move(sig));
  }
  return write_edf_signals(signals, static_cast<long>(spr), rec.annotations);
}

// ---------------------------------------------------------------------------
// CSV

inline Recording parse_csv(std::string_view text, double sample_rate_hz) {
  if (!(sample_rate_hz > 0.0)) throw Error(ErrorCode::InvalidArgument, "sample rate must be positive");
  Recording rec;
  rec.sample_rate_hz = sample_rate_hz;

  auto split = [](std::string_view line) {
    std::vector<std::string_view> cells;
    size_t pos = 0;
    while (true) {
      const auto comma = line.find(',', pos);
      cells.push_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    return cells;
  };

  size_t pos = 0;
  size_t line_no = 0;
  bool header_seen = false;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (!header_seen) {
      for (auto c : cells) rec.channels.push_back(trim(c));
      rec.samples.assign(rec.channels.size(), {});
      header_seen = true;
      continue;
    }
    if (cells.size() != rec.channels.size())
      throw Error(ErrorCode::RaggedRows, "line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                                             " cells, expected " + std::to_string(rec.channels.size()));
    for (size_t c = 0; c < cells.size(); ++c) {
      const auto cell = trim(cells[c]);
      double value = 0.0;
      const char* first = cell.data();
      const char* last = cell.data() + cell.size();
      if (first != last && *first == '+') ++first;
      const auto [ptr, ec] = std::from_chars(first, last, value);
      if (cell.empty() || ec != std::errc() || ptr != last)
        throw Error(ErrorCode::NonNumericCell, "line " + std::to_string(line_no) + ": '" + cell + "'");
      rec.samples[c].push_back(value);
    }
  }
  return rec;
}

inline Recording read_csv(const std::string& path, double sample_rate_hz) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str(), sample_rate_hz);
}

inline std::string to_csv(const Recording& rec) {
  std::string out;
  for (size_t c = 0; c < rec.channels.size(); ++c) out += (c ? "," : "") + rec.channels[c];
  out += '\n';
  char buf[32];
  for (size_t i = 0; i < rec.n_samples(); ++i) {
    for (size_t c = 0; c < rec.channels.size(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", rec.samples[c][i]);
      if (c) out += ',';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

// Dispatches on extension: .edf is EDF, anything else CSV.
inline Recording read_recording(const std::string& path, double csv_sample_rate_hz) {
  const bool is_edf = path.size() >= 4 && canonical_channel(path.substr(path.size() - 4)) == ".EDF";
  return is_edf ? read_edf(path) : read_csv(path, csv_sample_rate_hz);
}

// ---------------------------------------------------------------------------
// Butterworth bandpass

enum class FilterMode { Causal, ZeroPhase };

struct FilterSpec {
  double low_hz = 8.0;
  double high_hz = 30.0;
  int order = 4;
  FilterMode mode = FilterMode::Causal;

  bool operator==(const FilterSpec&) const = default;
};

// Direct-form II transposed second-order section; a0 == 1.
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;
};

// Digital bandpass from an analog Butterworth lowpass prototype of the given
// order (2*order poles), bilinear transform with prewarped band edges, gain
// normalised to unity at the geometric band centre.
inline std::vector<Biquad> design_butter_bandpass(const FilterSpec& spec, double sample_rate_hz) {
  using cd = std::complex<double>;
  const double nyquist = sample_rate_hz / 2.0;
  if (spec.order < 1) throw Error(ErrorCode::InvalidArgument, "filter order must be positive");
  if (!(spec.low_hz > 0.0) || !(spec.high_hz > spec.low_hz))
    throw Error(ErrorCode::InvalidArgument, "band edges must satisfy 0 < low < high");
  if (spec.high_hz >= nyquist) throw Error(ErrorCode::UnstableDesign, "upper band edge at or above Nyquist");

  const double fs2 = 2.0 * sample_rate_hz;
  const double wl = fs2 * std::tan(std::numbers::pi * spec.low_hz / sample_rate_hz);
  const double wh = fs2 * std::tan(std::numbers::pi * spec.high_hz / sample_rate_hz);
  const double bw = wh - wl;
  const double w0sq = wl * wh;

  std::vector<cd> zpoles;
  const int n = spec.order;
  for (int k = 0; k < n; ++k) {
    const double angle = std::numbers::pi * (2.0 * k + n + 1) / (2.0 * n);
    const cd p = std::polar(1.0, angle);
    const cd half = p * bw / 2.0;
    const cd root = std::sqrt(half * half - w0sq);
    for (const cd s : {half + root, half - root}) zpoles.push_back((fs2 + s) / (fs2 - s));
  }
  for (const auto& z : zpoles)
    if (!(std::abs(z) < 1.0 - 1e-12) || !std::isfinite(z.real()))
      throw Error(ErrorCode::UnstableDesign, "pole on or outside the unit circle");

  std::vector<cd> upper;
  std::vector<double> real_poles;
  for (const auto& z : zpoles) {
    if (std::abs(z.imag()) < 1e-12)
      real_poles.push_back(z.real());
    else if (z.imag() > 0)
      upper.push_back(z);
  }
  std::sort(upper.begin(), upper.end(), [](cd a, cd b) { return std::abs(a) < std::abs(b); });
  std::sort(real_poles.begin(), real_poles.end());

  std::vector<Biquad> sections;
  for (const auto& z : upper) sections.push_back({1.0, 0.0, -1.0, -2.0 * z.real(), std::norm(z)});
  for (size_t i = 0; i + 1 < real_poles.size(); i += 2)
    sections.push_back({1.0, 0.0, -1.0, -(real_poles[i] + real_poles[i + 1]), real_poles[i] * real_poles[i + 1]});

  const double centre = 2.0 * std::atan(std::sqrt(w0sq) / fs2);
  const cd zc = std::polar(1.0, -centre);
  cd h = 1.0;
  for (const auto& s : sections) h *= (s.b0 + s.b1 * zc + s.b2 * zc * zc) / (1.0 + s.a1 * zc + s.a2 * zc * zc);
  const double per_section = std::pow(1.0 / std::abs(h), 1.0 / static_cast<double>(sections.size()));
  for (auto& s : sections) {
    s.b0 *= per_section;
    s.b1 *= per_section;
    s.b2 *= per_section;
  }
  return sections;
}

inline std::complex<double> frequency_response(std::span<const Biquad> sections, double freq_hz, double sample_rate_hz) {
  const auto z1 = std::polar(1.0, -2.0 * std::numbers::pi * freq_hz / sample_rate_hz);
  std::complex<double> h = 1.0;
  for (const auto& s : sections) h *= (s.b0 + s.b1 * z1 + s.b2 * z1 * z1) / (1.0 + s.a1 * z1 + s.a2 * z1 * z1);
  return h;
}

// Stateful cascade for one channel; feeding chunks is equivalent to filtering
// the concatenation in one call.
class BiquadCascade {
 public:
  BiquadCascade() = default;
  explicit BiquadCascade(std::vector<Biquad> sections)
      : sections_(std::move(sections)), state_(sections_.size(), {0.0, 0.0}) {}

  double step(double x) {
    for (size_t i = 0; i < sections_.size(); ++i) {
      const auto& s = sections_[i];
      auto& z = state_[i];
      const double y = s.b0 * x + z[0];
      z[0] = s.b1 * x - s.a1 * y + z[1];
      z[1] = s.b2 * x - s.a2 * y;
      x = y;
    }
    return x;
  }

  void process(std::span<double> data) {
    for (auto& v : data) v = step(v);
  }

  void reset() { std::fill(state_.begin(), state_.end(), std::array<double, 2>{0.0, 0.0}); }

 private:
  std::vector<Biquad> sections_;
  std::vector<std::array<double, 2>> state_;
};

inline std::vector<double> filter_zero_phase(std::span<const Biquad> sections, std::span<const double> x, int order) {
  const size_t n = x.size();
  if (n == 0) return {};
  const size_t pad = std::min<size_t>(static_cast<size_t>(3 * (2 * order + 1)), n - 1);
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  const std::vector<Biquad> secs(sections.begin(), sections.end());
  BiquadCascade forward(secs);
  forward.process(ext);
  std::reverse(ext.begin(), ext.end());
  BiquadCascade backward(secs);
  backward.process(ext);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<long>(pad), ext.begin() + static_cast<long>(pad + n)};
}

inline Recording bandpass(const Recording& recording, const FilterSpec& spec) {
  const auto sections = design_butter_bandpass(spec, recording.sample_rate_hz);
  Recording out = recording;
  for (auto& row : out.samples) {
    if (spec.mode == FilterMode::ZeroPhase) {
      row = filter_zero_phase(sections, row, spec.order);
    } else {
      BiquadCascade cascade(sections);
      cascade.process(row);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Epoching

inline size_t seconds_to_samples(double seconds, double sample_rate_hz) {
  return static_cast<size_t>(std::llround(seconds * sample_rate_hz));
}

// Label of the annotation covering time t (onset <= t < onset + duration).
inline std::optional<TrialLabel> label_at(const std::vector<Annotation>& annotations, double t) {
  for (const auto& a : annotations)
    if (a.onset_s <= t && t < a.onset_s + a.duration_s) return trial_label_from_string(a.label);
  return std::nullopt;
}

inline std::vector<size_t> resolve_picks(const Recording& recording, const std::vector<std::string>& picks) {
  std::vector<size_t> idx;
  if (picks.empty()) {
    for (size_t i = 0; i < recording.channels.size(); ++i) idx.push_back(i);
    return idx;
  }
  for (const auto& p : picks) {
    const auto i = recording.channel_index(p);
    if (!i) throw Error(ErrorCode::MissingChannel, "channel '" + p + "' not in recording");
    idx.push_back(*i);
  }
  return idx;
}

inline EpochWindow extract_window(const Recording& recording, size_t start_sample, size_t length,
                                  const std::vector<size_t>& channel_idx) {
  EpochWindow w;
  w.start_s = static_cast<double>(start_sample) / recording.sample_rate_hz;
  w.sample_rate_hz = recording.sample_rate_hz;
  for (const auto c : channel_idx) {
    w.channels.push_back(recording.channels[c]);
    const auto& row = recording.samples[c];
    w.data.emplace_back(row.begin() + static_cast<long>(start_sample),
                        row.begin() + static_cast<long>(start_sample + length));
  }
  return w;
}

// Number of windows: floor((duration - window) / hop) + 1, evaluated in samples.
inline size_t epoch_count(size_t n_samples, size_t window_samples, size_t hop_samples) {
  if (window_samples == 0 || hop_samples == 0 || window_samples > n_samples) return 0;
  return (n_samples - window_samples) / hop_samples + 1;
}

// Sliding windows; empty picks selects every channel. Windows are labelled by
// the annotation covering their centre, Rest otherwise.
inline std::vector<EpochWindow> epoch_stream(const Recording& recording, double window_len_s, double hop_s,
                                             const std::vector<std::string>& channel_picks) {
  if (!(window_len_s > 0.0) || !(hop_s > 0.0)) throw Error(ErrorCode::InvalidArgument, "window and hop must be positive");
  const auto idx = resolve_picks(recording, channel_picks);
  const size_t win = seconds_to_samples(window_len_s, recording.sample_rate_hz);
  const size_t hop = seconds_to_samples(hop_s, recording.sample_rate_hz);
  if (win == 0 || hop == 0) throw Error(ErrorCode::InvalidArgument, "window or hop shorter than one sample");
  if (win > recording.n_samples()) throw Error(ErrorCode::InvalidArgument, "window longer than recording");

  std::vector<EpochWindow> out;
  const size_t count = epoch_count(recording.n_samples(), win, hop);
  out.reserve(count);
  for (size_t k = 0; k < count; ++k) {
    auto w = extract_window(recording, k * hop, win, idx);
    const double centre = w.start_s + window_len_s / 2.0;
    w.label = label_at(recording.annotations, centre).value_or(TrialLabel::Rest);
    out.push_back(std::move(w));
  }
  return out;
}

// One window per Left/Right cue, [offset, offset + length) seconds after onset.
inline std::vector<EpochWindow> cue_epochs(const Recording& recording, double offset_s, double length_s,
                                           const std::vector<std::string>& channel_picks) {
  const auto idx = resolve_picks(recording, channel_picks);
  const size_t len = seconds_to_samples(length_s, recording.sample_rate_hz);
  std::vector<EpochWindow> out;
  for (const auto& a : recording.annotations) {
    const auto label = trial_label_from_string(a.label);
    if (!label || *label == TrialLabel::Rest) continue;
    const size_t start = seconds_to_samples(a.onset_s + offset_s, recording.sample_rate_hz);
    if (start + len > recording.n_samples()) continue;
    auto w = extract_window(recording, start, len, idx);
    w.label = label;
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace omnineuro
