// omnineuro command-line front end.
//
//   omnineuro calibrate --input rec.edf --out session.json [--config cfg.json] [--seed N]
//   omnineuro stream    --session session.json --input rec.edf --out streamed.json [--realtime=false]
//   omnineuro serve     --session session.json --input rec.edf [--port 8765] [--out served.json]
//   omnineuro eval      [--data DIR --subjects 1-5] --folds 5 --seed N --out table.json
//   omnineuro report    --session streamed.json [--endpoint URL] [--timeout-ms 2000]
//   omnineuro sonify    --session streamed.json --out feedback.wav
//   omnineuro synth     --out rec.edf [--trials 40] [--erd 0.6] [--seed 1]
//
// Exit codes: 0 success, 2 data error, 3 config error.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "omnineuro/baseline_eval.hpp"
#include "omnineuro/report.hpp"
#include "omnineuro/service.hpp"
#include "omnineuro/session.hpp"
#include "omnineuro/synthetic.hpp"

namespace {

using namespace omnineuro;

constexpr int kExitData = 2;
constexpr int kExitConfig = 3;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Anything thrown inside is reported as a configuration problem.
template <typename F>
auto config_stage(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

std::string llm_endpoint(const std::string& flag, const std::string& from_config) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("OMNINEURO_LLM_ENDPOINT"); env && *env) return env;
  return from_config;
}

void write_text(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path + " for writing");
  out << text;
}

// "1,2,7-9" -> {1, 2, 7, 8, 9}
std::vector<int> parse_subjects(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    if (part.empty()) continue;
    const auto dash = part.find('-');
    try {
      if (dash == std::string::npos) {
        out.push_back(std::stoi(part));
      } else {
        const int lo = std::stoi(part.substr(0, dash)), hi = std::stoi(part.substr(dash + 1));
        if (hi < lo) throw ConfigError("bad subject range " + part);
        for (int s = lo; s <= hi; ++s) out.push_back(s);
      }
    } catch (const std::logic_error&) {
      throw ConfigError("bad subject list '" + text + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty subject list");
  return out;
}

struct CalibrateArgs {
  std::string input, config, out;
  std::optional<uint64_t> seed;
  std::optional<double> csv_rate;
};

int cmd_calibrate(const CalibrateArgs& a) {
  PipelineConfig cfg = config_stage([&] { return a.config.empty() ? PipelineConfig{} : load_config(a.config); });
  if (a.seed) cfg.seed = *a.seed;
  if (a.csv_rate) cfg.csv_sample_rate_hz = *a.csv_rate;
  const auto rec = read_recording(a.input, cfg.csv_sample_rate_hz);
  config_stage([&] { return design_butter_bandpass(cfg.filter, rec.sample_rate_hz); });
  const auto session = run_calibration(rec, cfg);
  persist_session(session, a.out);
  std::clog << "calibrate: " << session.calibration.n_windows << " windows, " << session.calibration.n_labeled
            << " labelled, calibration accuracy " << format_fixed("%.4f", session.calibration.calibration_accuracy)
            << ", veto threshold " << format_fixed("%.6g", session.veto_threshold) << "\n";
  return 0;
}

struct StreamArgs {
  std::string session, input, out, frames_out;
  bool realtime = false;
  double speed = 1.0;
  bool audio = false;
};

int cmd_stream(const StreamArgs& a) {
  auto session = load_session(a.session);
  if (a.audio) session.config.audio_in_frames = true;
  if (!(a.speed > 0.0)) throw ConfigError("--speed must be positive");
  const auto rec = read_recording(a.input, session.config.csv_sample_rate_hz);

  std::ofstream frames_file;
  if (!a.frames_out.empty() && a.frames_out != "-") {
    frames_file.open(a.frames_out, std::ios::binary);
    if (!frames_file) throw Error(ErrorCode::IoFailure, "cannot open " + a.frames_out);
  }
  std::ostream* sink = a.frames_out == "-" ? &std::cout : (frames_file.is_open() ? &frames_file : nullptr);

  StreamControl control;
  control.speed = a.speed;
  StreamOptions opts;
  opts.realtime = a.realtime;
  opts.control = &control;
  if (sink)
    opts.on_frame = [&](const FeedbackFrame& f) {
      *sink << to_json(f).dump() << '\n';
      if (!*sink) throw Error(ErrorCode::IoFailure, "frame output failed");
    };
  const auto out = run_stream(session, rec, opts);
  persist_session(out, a.out);
  std::clog << "stream: " << out.frames.size() - session.frames.size() << " frames\n";
  return 0;
}

struct ServeArgs {
  std::string session, input, out, host = "127.0.0.1", endpoint;
  int port = 8765;
  double speed = 1.0;
  bool wait = false;
  int timeout_ms = 0;
};

int cmd_serve(const ServeArgs& a) {
  const auto session = load_session(a.session);
  const auto rec = read_recording(a.input, session.config.csv_sample_rate_hz);
  ServeOptions opts;
  opts.port = config_stage([&] {
    if (a.port < 0 || a.port > 65535) throw ConfigError("--port out of range");
    return static_cast<uint16_t>(a.port);
  });
  opts.host = a.host;
  opts.speed = a.speed;
  opts.wait_for_start = a.wait;
  opts.llm_endpoint = llm_endpoint(a.endpoint, session.config.llm_endpoint);
  opts.llm_timeout_ms = a.timeout_ms > 0 ? a.timeout_ms : session.config.llm_timeout_ms;
  SessionRecord out;
  try {
    out = serve_session(session, rec, opts);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::BindFailure) throw ConfigError(e.what());
    throw;
  }
  if (!a.out.empty()) persist_session(out, a.out);
  return 0;
}

struct EvalArgs {
  std::string data, subjects = "1-5", out, table_out;
  int folds = 5;
  uint64_t seed = 42;
  size_t synthetic_subjects = 6;
  double erd = 0.6;
  std::optional<double> responsive;
};

int cmd_eval(const EvalArgs& a) {
  if (a.folds < 2) throw ConfigError("--folds must be at least 2");
  EvalConfig cfg;
  std::vector<SubjectData> cohort;
  if (a.data.empty()) {
    std::clog << "eval: no --data directory; using the bundled synthetic cohort\n";
    cohort = synthetic_cohort(a.synthetic_subjects, a.seed, a.erd, cfg);
  } else {
    for (const int s : config_stage([&] { return parse_subjects(a.subjects); }))
      cohort.push_back(load_physionet_subject(a.data, s, cfg));
  }
  const auto result = evaluate(cohort, a.folds, a.seed, cfg, a.responsive);
  const auto table = render_table(result);
  std::cout << table;
  if (!a.out.empty()) write_text(a.out, to_json(result).dump(2) + "\n");
  if (!a.table_out.empty()) write_text(a.table_out, table);
  return 0;
}

struct ReportArgs {
  std::string session, endpoint, out;
  int timeout_ms = 0;
  bool append = false;
};

int cmd_report(const ReportArgs& a) {
  auto session = load_session(a.session);
  const auto summary = summarize(session);
  const auto endpoint = llm_endpoint(a.endpoint, session.config.llm_endpoint);
  const int timeout = a.timeout_ms > 0 ? a.timeout_ms : session.config.llm_timeout_ms;
  const auto report = generate_report(summary, endpoint, timeout);
  std::cout << report.body;
  if (!a.out.empty()) write_text(a.out, report.body);
  if (a.append) {
    session.reports.push_back(report);
    persist_session(session, a.session);
  }
  return 0;
}

int cmd_sonify(const std::string& session_path, const std::string& out) {
  const auto session = load_session(session_path);
  if (session.frames.empty()) throw Error(ErrorCode::EmptySession, "session has no frames to render");
  write_wav(render_session_audio(session), out);
  std::clog << "sonify: " << session.frames.size() << " frames -> " << out << "\n";
  return 0;
}

struct SynthArgs {
  std::string out;
  size_t trials = 40, channels = 8;
  double erd = 0.6, artifact_rate = 0.0;
  uint64_t seed = 1;
};

int cmd_synth(const SynthArgs& a) {
  SyntheticSpec spec;
  spec.n_trials = a.trials;
  spec.n_channels = a.channels;
  spec.erd_depth = a.erd;
  spec.artifact_rate = a.artifact_rate;
  spec.seed = a.seed;
  const auto rec = config_stage([&] { return make_synthetic_recording(spec); });
  if (a.out.size() >= 4 && a.out.substr(a.out.size() - 4) == ".csv") {
    write_text(a.out, to_csv(rec.recording));
  } else {
    const auto bytes = write_edf(rec.recording);
    std::ofstream f(a.out, std::ios::binary);
    if (!f) throw Error(ErrorCode::IoFailure, "cannot open " + a.out);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"omnineuro: explainable EEG neurofeedback engine"};
  app.require_subcommand(1);

  CalibrateArgs cal;
  auto* c = app.add_subcommand("calibrate", "fit fusion weights and the artifact autoencoder");
  c->add_option("--input", cal.input, "EDF/EDF+ or CSV recording with Left/Right annotations")->required();
  c->add_option("--out", cal.out, "session file to write")->required();
  c->add_option("--config", cal.config, "JSON pipeline configuration");
  c->add_option("--seed", cal.seed);
  c->add_option("--csv-rate", cal.csv_rate, "sample rate for CSV input");

  StreamArgs st;
  auto* s = app.add_subcommand("stream", "replay a recording through the real-time loop");
  s->add_option("--session", st.session)->required();
  s->add_option("--input", st.input)->required();
  s->add_option("--out", st.out, "session file with the frame log")->required();
  s->add_option("--realtime", st.realtime, "pace frames at wall-clock hop intervals")->default_val(false);
  s->add_option("--speed", st.speed, "replay speed factor when paced")->default_val(1.0);
  s->add_option("--frames", st.frames_out, "also write NDJSON frames here ('-' for stdout)");
  s->add_flag("--audio", st.audio, "embed base64 PCM in every frame");

  ServeArgs sv;
  auto* v = app.add_subcommand("serve", "stream a recording to NDJSON telemetry clients");
  v->add_option("--session", sv.session)->required();
  v->add_option("--input", sv.input)->required();
  v->add_option("--port", sv.port)->default_val(8765);
  v->add_option("--host", sv.host)->default_val("127.0.0.1");
  v->add_option("--speed", sv.speed)->default_val(1.0);
  v->add_option("--out", sv.out, "session file with frames and reports");
  v->add_option("--endpoint", sv.endpoint, "LLM gateway URL (else $OMNINEURO_LLM_ENDPOINT)");
  v->add_option("--timeout-ms", sv.timeout_ms);
  v->add_flag("--wait-for-start", sv.wait, "hold frames until a client sends start");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "CSP+LDA vs OmniNeuro cross-validation");
  e->add_option("--data", ev.data, "PhysioNet eegmmidb directory (omit for the synthetic cohort)");
  e->add_option("--subjects", ev.subjects, "e.g. 1-5 or 1,4,9");
  e->add_option("--folds", ev.folds)->default_val(5);
  e->add_option("--seed", ev.seed)->default_val(42);
  e->add_option("--out", ev.out, "JSON table");
  e->add_option("--table", ev.table_out, "aligned text table");
  e->add_option("--synthetic-subjects", ev.synthetic_subjects)->default_val(6);
  e->add_option("--erd", ev.erd, "synthetic desynchronisation depth")->default_val(0.6);
  e->add_option("--responsive-threshold", ev.responsive, "baseline accuracy defining responsive subjects");

  ReportArgs rp;
  auto* r = app.add_subcommand("report", "clinical report for a streamed session");
  r->add_option("--session", rp.session)->required();
  r->add_option("--endpoint", rp.endpoint, "LLM gateway URL (else $OMNINEURO_LLM_ENDPOINT)");
  r->add_option("--timeout-ms", rp.timeout_ms);
  r->add_option("--out", rp.out);
  r->add_flag("--append", rp.append, "store the report in the session file");

  std::string son_session, son_out;
  auto* so = app.add_subcommand("sonify", "render the session's feedback audio to WAV");
  so->add_option("--session", son_session)->required();
  so->add_option("--out", son_out)->required();

  SynthArgs sy;
  auto* y = app.add_subcommand("synth", "write a seeded synthetic motor-imagery recording");
  y->add_option("--out", sy.out, ".edf or .csv")->required();
  y->add_option("--trials", sy.trials)->default_val(40);
  y->add_option("--channels", sy.channels)->default_val(8);
  y->add_option("--erd", sy.erd)->default_val(0.6);
  y->add_option("--artifact-rate", sy.artifact_rate)->default_val(0.0);
  y->add_option("--seed", sy.seed)->default_val(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*c) return cmd_calibrate(cal);
    if (*s) return cmd_stream(st);
    if (*v) return cmd_serve(sv);
    if (*e) return cmd_eval(ev);
    if (*r) return cmd_report(rp);
    if (*so) return cmd_sonify(son_session, son_out);
    if (*y) return cmd_synth(sy);
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return kExitConfig;
  } catch (const Error& err) {
    std::cerr << "error [" << to_string(err.code()) << "]: " << err.what() << "\n";
    return kExitData;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitData;
  }
  return 0;
}
