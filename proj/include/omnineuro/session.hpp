#pragma once

// Pipeline configuration, the session record (calibration artifacts + frame
// log + reports) and their JSON forms. The session file is a single JSON
// document tagged with a schema name and version.

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "omnineuro/artifact_veto.hpp"
#include "omnineuro/error.hpp"
#include "omnineuro/features.hpp"
#include "omnineuro/frame.hpp"
#include "omnineuro/fusion.hpp"
#include "omnineuro/quantum_engine.hpp"
#include "omnineuro/report.hpp"
#include "omnineuro/signal_io.hpp"

namespace omnineuro {

struct PipelineConfig {
  FilterSpec filter{8.0, 30.0, 4, FilterMode::Causal};
  double window_len_s = 1.0;
  double hop_s = 0.125;
  std::vector<std::string> veto_channels;  // empty: every channel of the recording
  EngineConfig engines;
  QuantumConfig quantum;
  TrainOptions autoencoder{0, 300, 0.05, 0};  // seed comes from `seed`
  uint64_t seed = 42;
  bool audio_in_frames = false;
  std::string llm_endpoint;
  int llm_timeout_ms = 2000;
  double csv_sample_rate_hz = 160.0;

  bool operator==(const PipelineConfig& o) const {
    return filter == o.filter && window_len_s == o.window_len_s && hop_s == o.hop_s &&
           veto_channels == o.veto_channels && engines == o.engines && quantum == o.quantum &&
           autoencoder.d_hidden == o.autoencoder.d_hidden && autoencoder.epochs == o.autoencoder.epochs &&
           autoencoder.learning_rate == o.autoencoder.learning_rate && seed == o.seed &&
           audio_in_frames == o.audio_in_frames && llm_endpoint == o.llm_endpoint &&
           llm_timeout_ms == o.llm_timeout_ms && csv_sample_rate_hz == o.csv_sample_rate_hz;
  }
};

struct CalibrationInfo {
  size_t n_windows = 0;
  size_t n_labeled = 0;
  double calibration_accuracy = 0.0;
  double autoencoder_loss = 0.0;

  bool operator==(const CalibrationInfo&) const = default;
};

inline constexpr std::string_view kSessionSchema = "omnineuro.session";
inline constexpr int kSessionVersion = 1;

struct SessionRecord {
  PipelineConfig config;
  FusionWeights weights;
  FeatureScaler scaler;
  Autoencoder autoencoder;
  double veto_threshold = 1.0;
  std::vector<std::string> veto_channels;  // resolved at calibration
  CalibrationInfo calibration;
  std::vector<FeedbackFrame> frames;
  std::vector<ClinicalReport> reports;

  bool operator==(const SessionRecord&) const = default;
};

inline MetricsSummary summarize(const SessionRecord& session) { return summarize(std::span(session.frames)); }

// ---------------------------------------------------------------------------
// base64 (PCM payloads)

inline std::string base64_encode(std::span<const uint8_t> bytes) {
  static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const uint32_t v = uint32_t(bytes[i]) << 16 | uint32_t(bytes[i + 1]) << 8 | bytes[i + 2];
    for (int s = 18; s >= 0; s -= 6) out.push_back(kAlphabet[(v >> s) & 63]);
  }
  if (const size_t rest = bytes.size() - i; rest > 0) {
    const uint32_t v = uint32_t(bytes[i]) << 16 | (rest == 2 ? uint32_t(bytes[i + 1]) << 8 : 0u);
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(rest == 2 ? kAlphabet[(v >> 6) & 63] : '=');
    out.push_back('=');
  }
  return out;
}

inline std::string pcm_base64(const AudioFrame& frame) {
  std::vector<uint8_t> bytes;
  bytes.reserve(frame.samples.size() * 2);
  for (const double s : frame.samples) {
    const auto v = static_cast<uint16_t>(to_pcm16(s));
    bytes.push_back(static_cast<uint8_t>(v & 0xff));
    bytes.push_back(static_cast<uint8_t>(v >> 8));
  }
  return base64_encode(bytes);
}

// ---------------------------------------------------------------------------
// JSON

using nlohmann::json;

inline json to_json(const Decision& d) {
  return {{"class", to_string(d.cls)}, {"p_move", d.p_move}, {"reason", to_string(d.reason)}};
}

inline Decision decision_from_json(const json& j) {
  Decision d;
  const auto cls = j.at("class").get<std::string>();
  const auto reason = j.at("reason").get<std::string>();
  if (cls == "Left") d.cls = DecisionClass::Left;
  else if (cls == "Right") d.cls = DecisionClass::Right;
  else if (cls == "Neutral") d.cls = DecisionClass::Neutral;
  else throw Error(ErrorCode::SchemaMismatch, "unknown decision class '" + cls + "'");
  if (reason == "Confident") d.reason = DecisionReason::Confident;
  else if (reason == "AmbiguityZone") d.reason = DecisionReason::AmbiguityZone;
  else if (reason == "ArtifactVeto") d.reason = DecisionReason::ArtifactVeto;
  else if (reason == "DegenerateSignal") d.reason = DecisionReason::DegenerateSignal;
  else throw Error(ErrorCode::SchemaMismatch, "unknown decision reason '" + reason + "'");
  d.p_move = j.at("p_move").get<double>();
  return d;
}

// Wire and file form of a frame: lower_snake_case field names.
inline json to_json(const FeedbackFrame& f) {
  json j{{"seq", f.seq},
         {"t_s", f.t_s},
         {"l_idx", f.l_idx},
         {"delta_hfd", f.delta_hfd},
         {"theta", f.theta},
         {"phi", f.phi},
         {"p_move", f.p_move},
         {"decision", to_json(f.decision)},
         {"veto",
          {{"reconstruction_error", f.veto.reconstruction_error},
           {"threshold", f.veto.threshold},
           {"rejected", f.veto.rejected}}},
         {"sonification",
          {{"freq_hz", f.sonification.freq_hz},
           {"distortion", f.sonification.distortion},
           {"gain", f.sonification.gain}}},
         {"latency_ms", f.latency_ms}};
  if (f.pcm) j["pcm"] = *f.pcm;
  return j;
}

inline FeedbackFrame frame_from_json(const json& j) {
  FeedbackFrame f;
  f.seq = j.at("seq").get<uint64_t>();
  f.t_s = j.at("t_s").get<double>();
  f.l_idx = j.at("l_idx").get<double>();
  f.delta_hfd = j.at("delta_hfd").get<double>();
  f.theta = j.at("theta").get<double>();
  f.phi = j.at("phi").get<double>();
  f.p_move = j.at("p_move").get<double>();
  f.decision = decision_from_json(j.at("decision"));
  const auto& v = j.at("veto");
  f.veto = {v.at("reconstruction_error").get<double>(), v.at("threshold").get<double>(), v.at("rejected").get<bool>()};
  const auto& s = j.at("sonification");
  f.sonification = {s.at("freq_hz").get<double>(), s.at("distortion").get<double>(), s.at("gain").get<double>()};
  f.latency_ms = j.at("latency_ms").get<double>();
  if (j.contains("pcm")) f.pcm = j.at("pcm").get<std::string>();
  return f;
}

inline json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j.at(static_cast<size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != cols) throw Error(ErrorCode::SchemaMismatch, "ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<size_t>(c)).get<double>();
  }
  return m;
}

inline json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Eigen::VectorXd vector_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

inline json to_json(const PipelineConfig& c) {
  return {{"filter",
           {{"low_hz", c.filter.low_hz},
            {"high_hz", c.filter.high_hz},
            {"order", c.filter.order},
            {"mode", c.filter.mode == FilterMode::Causal ? "causal" : "zero_phase"}}},
          {"window_len_s", c.window_len_s},
          {"hop_s", c.hop_s},
          {"veto_channels", c.veto_channels},
          {"epsilon", c.engines.physics.epsilon},
          {"k_max", c.engines.chaos.k_max},
          {"omega_max", c.quantum.omega_max},
          {"quantum_gain", c.quantum.gain},
          {"autoencoder",
           {{"d_hidden", c.autoencoder.d_hidden},
            {"epochs", c.autoencoder.epochs},
            {"learning_rate", c.autoencoder.learning_rate}}},
          {"seed", c.seed},
          {"audio_in_frames", c.audio_in_frames},
          {"llm_endpoint", c.llm_endpoint},
          {"llm_timeout_ms", c.llm_timeout_ms},
          {"csv_sample_rate_hz", c.csv_sample_rate_hz}};
}

// Missing keys keep their defaults, so a config file may list only overrides.
inline PipelineConfig config_from_json(const json& j, PipelineConfig c = {}) {
  try {
    if (j.contains("filter")) {
      const auto& f = j.at("filter");
      c.filter.low_hz = f.value("low_hz", c.filter.low_hz);
      c.filter.high_hz = f.value("high_hz", c.filter.high_hz);
      c.filter.order = f.value("order", c.filter.order);
      const auto mode = f.value("mode", std::string(c.filter.mode == FilterMode::Causal ? "causal" : "zero_phase"));
      if (mode == "causal") c.filter.mode = FilterMode::Causal;
      else if (mode == "zero_phase") c.filter.mode = FilterMode::ZeroPhase;
      else throw Error(ErrorCode::InvalidArgument, "filter.mode must be causal or zero_phase");
    }
    c.window_len_s = j.value("window_len_s", c.window_len_s);
    c.hop_s = j.value("hop_s", c.hop_s);
    c.veto_channels = j.value("veto_channels", c.veto_channels);
    c.engines.physics.epsilon = j.value("epsilon", c.engines.physics.epsilon);
    c.engines.chaos.k_max = j.value("k_max", c.engines.chaos.k_max);
    c.quantum.omega_max = j.value("omega_max", c.quantum.omega_max);
    c.quantum.gain = j.value("quantum_gain", c.quantum.gain);
    if (j.contains("autoencoder")) {
      const auto& a = j.at("autoencoder");
      c.autoencoder.d_hidden = a.value("d_hidden", c.autoencoder.d_hidden);
      c.autoencoder.epochs = a.value("epochs", c.autoencoder.epochs);
      c.autoencoder.learning_rate = a.value("learning_rate", c.autoencoder.learning_rate);
    }
    c.seed = j.value("seed", c.seed);
    c.audio_in_frames = j.value("audio_in_frames", c.audio_in_frames);
    c.llm_endpoint = j.value("llm_endpoint", c.llm_endpoint);
    c.llm_timeout_ms = j.value("llm_timeout_ms", c.llm_timeout_ms);
    c.csv_sample_rate_hz = j.value("csv_sample_rate_hz", c.csv_sample_rate_hz);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("config: ") + e.what());
  }
  return c;
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open config " + path);
  try {
    return config_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("config is not valid JSON: ") + e.what());
  }
}

inline json to_json(const ClinicalReport& r) {
  return {{"body", r.body}, {"source", to_string(r.source)}, {"verified", r.verified}};
}

inline json to_json(const SessionRecord& s) {
  json frames = json::array();
  for (const auto& f : s.frames) frames.push_back(to_json(f));
  json reports = json::array();
  for (const auto& r : s.reports) reports.push_back(to_json(r));
  return {{"schema", kSessionSchema},
          {"version", kSessionVersion},
          {"config", to_json(s.config)},
          {"fusion_weights",
           {{"w_physics", s.weights.w_physics},
            {"w_chaos", s.weights.w_chaos},
            {"bias", s.weights.bias},
            {"quantum_gain", s.weights.quantum_gain}}},
          {"feature_scaler", {{"mean", s.scaler.mean}, {"scale", s.scaler.scale}}},
          {"autoencoder",
           {{"activation", "tanh"},
            {"w_enc", matrix_to_json(s.autoencoder.w_enc)},
            {"b_enc", vector_to_json(s.autoencoder.b_enc)},
            {"w_dec", matrix_to_json(s.autoencoder.w_dec)},
            {"b_dec", vector_to_json(s.autoencoder.b_dec)}}},
          {"veto_threshold", s.veto_threshold},
          {"veto_channels", s.veto_channels},
          {"calibration",
           {{"n_windows", s.calibration.n_windows},
            {"n_labeled", s.calibration.n_labeled},
            {"calibration_accuracy", s.calibration.calibration_accuracy},
            {"autoencoder_loss", s.calibration.autoencoder_loss}}},
          {"frames", frames},
          {"reports", reports}};
}

inline SessionRecord session_from_json(const json& j) {
  if (!j.is_object() || j.value("schema", std::string()) != kSessionSchema)
    throw Error(ErrorCode::SchemaMismatch, "not a session document");
  if (!j.contains("version") || !j.at("version").is_number_integer() || j.at("version").get<int>() != kSessionVersion)
    throw Error(ErrorCode::SchemaMismatch, "unsupported session version");
  try {
    SessionRecord s;
    s.config = config_from_json(j.at("config"));
    const auto& w = j.at("fusion_weights");
    s.weights = {w.at("w_physics").get<double>(), w.at("w_chaos").get<double>(), w.at("bias").get<double>(),
                 w.at("quantum_gain").get<double>()};
    s.scaler.mean = j.at("feature_scaler").at("mean").get<std::vector<double>>();
    s.scaler.scale = j.at("feature_scaler").at("scale").get<std::vector<double>>();
    const auto& ae = j.at("autoencoder");
    s.autoencoder.w_enc = matrix_from_json(ae.at("w_enc"));
    s.autoencoder.b_enc = vector_from_json(ae.at("b_enc"));
    s.autoencoder.w_dec = matrix_from_json(ae.at("w_dec"));
    s.autoencoder.b_dec = vector_from_json(ae.at("b_dec"));
    s.veto_threshold = j.at("veto_threshold").get<double>();
    s.veto_channels = j.at("veto_channels").get<std::vector<std::string>>();
    const auto& c = j.at("calibration");
    s.calibration = {c.at("n_windows").get<size_t>(), c.at("n_labeled").get<size_t>(),
                     c.at("calibration_accuracy").get<double>(), c.at("autoencoder_loss").get<double>()};
    for (const auto& f : j.at("frames")) s.frames.push_back(frame_from_json(f));
    for (const auto& r : j.at("reports")) {
      ClinicalReport rep;
      rep.body = r.at("body").get<std::string>();
      rep.source = r.at("source").get<std::string>() == "RemoteLLM" ? ReportSource::RemoteLLM : ReportSource::RuleBased;
      rep.verified = r.at("verified").get<bool>();
      s.reports.push_back(std::move(rep));
    }
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, e.what());
  }
}

inline std::string session_to_string(const SessionRecord& s) { return to_json(s).dump(1) + "\n"; }

inline void persist_session(const SessionRecord& s, const std::string& path) {
  const auto text = session_to_string(s);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path + " for writing");
  out << text;
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path);
}

inline SessionRecord load_session(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SchemaMismatch, std::string("session is not valid JSON: ") + e.what());
  }
  return session_from_json(j);
}

}  // namespace omnineuro
