#pragma once

// The real-time loop (ingest -> engines -> veto -> fusion -> decision ->
// sonification), calibration, the NDJSON telemetry server and the
// asynchronous report worker.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/time.h>
#include <unistd.h>

#include <json.hpp>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "omnineuro/artifact_veto.hpp"
#include "omnineuro/features.hpp"
#include "omnineuro/fusion.hpp"
#include "omnineuro/quantum_engine.hpp"
#include "omnineuro/report.hpp"
#include "omnineuro/session.hpp"
#include "omnineuro/signal_io.hpp"
#include "omnineuro/sonification.hpp"

namespace omnineuro {

inline const std::vector<std::string>& motor_channels() {
  static const std::vector<std::string> names = {"C3", "C4"};
  return names;
}

// ---------------------------------------------------------------------------
// Calibration

inline SessionRecord run_calibration(const Recording& recording, const PipelineConfig& config) {
  recording.validate();
  bool has_cues = false;
  for (const auto& a : recording.annotations) {
    const auto label = trial_label_from_string(a.label);
    has_cues = has_cues || (label && *label != TrialLabel::Rest);
  }
  if (!has_cues) throw Error(ErrorCode::InsufficientData, "recording has no Left/Right annotations");

  FilterSpec filter = config.filter;
  filter.mode = FilterMode::Causal;  // calibration sees what the stream will see
  const Recording filtered = bandpass(recording, filter);

  const auto motor = epoch_stream(filtered, config.window_len_s, config.hop_s, motor_channels());
  const auto veto_windows = epoch_stream(filtered, config.window_len_s, config.hop_s, config.veto_channels);

  std::vector<LabeledFeature> labeled;
  for (const auto& w : motor) {
    if (!w.label || *w.label == TrialLabel::Rest) continue;
    const auto f = extract_features(w, config.engines);
    if (!f.degenerate) labeled.push_back({f.vector, *w.label});
  }

  SessionRecord session;
  session.config = config;
  session.weights = calibrate(labeled);

  std::vector<FeatureRow> raw;
  raw.reserve(veto_windows.size());
  for (const auto& w : veto_windows) raw.push_back(raw_window_features(w));
  session.scaler = FeatureScaler::fit(raw);
  std::vector<FeatureRow> scaled;
  scaled.reserve(raw.size());
  for (const auto& r : raw) scaled.push_back(session.scaler.apply(r));

  TrainOptions opts = config.autoencoder;
  opts.seed = config.seed;
  auto trained = train_with_history(scaled, opts);
  session.autoencoder = std::move(trained.model);
  session.veto_threshold = calibrate_threshold(session.autoencoder, scaled);
  session.veto_channels = veto_windows.front().channels;

  session.calibration.n_windows = motor.size();
  session.calibration.n_labeled = labeled.size();
  session.calibration.calibration_accuracy = fusion_accuracy(labeled, session.weights);
  session.calibration.autoencoder_loss = dataset_loss(session.autoencoder, scaled);
  return session;
}

// ---------------------------------------------------------------------------
// Streaming

// Incremental frame computation: one causal filter cascade per used channel,
// fed sample by sample, so frame k only depends on samples before
// k*hop + window.
class StreamProcessor {
 public:
  StreamProcessor(const SessionRecord& session, const Recording& recording)
      : session_(session), recording_(recording) {
    recording.validate();
    const auto& cfg = session.config;
    win_ = seconds_to_samples(cfg.window_len_s, recording.sample_rate_hz);
    hop_ = seconds_to_samples(cfg.hop_s, recording.sample_rate_hz);
    if (win_ == 0 || hop_ == 0) throw Error(ErrorCode::InvalidArgument, "window or hop shorter than one sample");

    motor_idx_ = resolve_picks(recording, motor_channels());
    veto_idx_ = resolve_picks(recording, session.veto_channels);
    if (veto_idx_.size() * 3 != session.scaler.mean.size())
      throw Error(ErrorCode::MissingChannel, "veto channel set differs from calibration");

    FilterSpec filter = cfg.filter;
    filter.mode = FilterMode::Causal;
    const auto sections = design_butter_bandpass(filter, recording.sample_rate_hz);
    for (const auto i : motor_idx_) use(i);
    for (const auto i : veto_idx_) use(i);
    for (size_t slot = 0; slot < used_.size(); ++slot) {
      cascades_.emplace_back(sections);
      buffers_.emplace_back();
    }
    quantum_ = cfg.quantum;
    quantum_.gain = session.weights.quantum_gain;
  }

  size_t frame_count() const { return epoch_count(recording_.n_samples(), win_, hop_); }
  double hop_s() const { return static_cast<double>(hop_) / recording_.sample_rate_hz; }
  double window_s() const { return static_cast<double>(win_) / recording_.sample_rate_hz; }

  // Frames must be requested in order 0, 1, 2, ...
  FeedbackFrame next(uint64_t seq) {
    const size_t start = k_ * hop_;
    const size_t end = start + win_;
    if (end > recording_.n_samples()) throw Error(ErrorCode::StreamAborted, "recording exhausted");
    for (size_t slot = 0; slot < used_.size(); ++slot) {
      const auto& row = recording_.samples[used_[slot]];
      auto& buf = buffers_[slot];
      for (size_t i = filtered_upto_; i < end; ++i) buf.push_back(cascades_[slot].step(row[i]));
    }
    filtered_upto_ = end;

    const double t_s = static_cast<double>(start) / recording_.sample_rate_hz;
    const auto motor = window_of(motor_idx_, start, t_s);
    const auto features = extract_features(motor, session_.config.engines);
    const auto veto_result =
        veto(session_.autoencoder, featurize_window(window_of(veto_idx_, start, t_s), session_.scaler),
             session_.veto_threshold);

    // Vetoed or degenerate windows hold the confidence state where it was.
    if (!veto_result.rejected && !features.degenerate) {
      const double target = score_to_theta(fuse(features.vector, session_.weights), quantum_);
      state_ = update_state(state_, target, quantum_, delta_hfd_to_phi(features.vector.delta_hfd));
    }
    const auto decision = decide(state_.p_move, veto_result, features.degenerate);
    const auto params = map_params(decision, features.vector, gain_);
    gain_ = params.gain;

    FeedbackFrame frame;
    frame.seq = seq;
    frame.t_s = t_s;
    frame.l_idx = features.vector.l_idx;
    frame.delta_hfd = features.vector.delta_hfd;
    frame.theta = state_.theta;
    frame.phi = state_.phi;
    frame.p_move = state_.p_move;
    frame.decision = decision;
    frame.veto = veto_result;
    frame.sonification = params;
    if (session_.config.audio_in_frames) {
      auto audio = synthesize(params, hop_s(), phase_);
      phase_ = audio.phase_out;
      frame.pcm = pcm_base64(audio.frame);
    }

    ++k_;
    const size_t keep_from = k_ * hop_;
    for (auto& buf : buffers_) buf.erase(buf.begin(), buf.begin() + static_cast<long>(keep_from - buf_start_));
    buf_start_ = keep_from;
    return frame;
  }

 private:
  void use(size_t channel) {
    for (size_t s = 0; s < used_.size(); ++s)
      if (used_[s] == channel) {
        slot_of_.push_back({channel, s});
        return;
      }
    slot_of_.push_back({channel, used_.size()});
    used_.push_back(channel);
  }

  size_t slot(size_t channel) const {
    for (const auto& [c, s] : slot_of_)
      if (c == channel) return s;
    throw Error(ErrorCode::MissingChannel, "channel not tracked");
  }

  EpochWindow window_of(const std::vector<size_t>& idx, size_t start, double t_s) const {
    EpochWindow w;
    w.start_s = t_s;
    w.sample_rate_hz = recording_.sample_rate_hz;
    for (const auto c : idx) {
      const auto& buf = buffers_[slot(c)];
      const auto from = buf.begin() + static_cast<long>(start - buf_start_);
      w.channels.push_back(recording_.channels[c]);
      w.data.emplace_back(from, from + static_cast<long>(win_));
    }
    return w;
  }

  const SessionRecord& session_;
  const Recording& recording_;
  size_t win_ = 0, hop_ = 0;
  std::vector<size_t> motor_idx_, veto_idx_;
  std::vector<size_t> used_;
  std::vector<std::pair<size_t, size_t>> slot_of_;
  std::vector<BiquadCascade> cascades_;
  std::vector<std::vector<double>> buffers_;
  size_t buf_start_ = 0;
  size_t filtered_upto_ = 0;
  size_t k_ = 0;
  QuantumConfig quantum_;
  QuantumState state_;
  double gain_ = 0.0;
  double phase_ = 0.0;
};

// Shared between the frame loop and whoever steers it (telemetry commands).
struct StreamControl {
  std::atomic<double> speed{1.0};
  std::atomic<bool> running{true};  // false pauses emission
  std::atomic<bool> cancel{false};
};

struct StreamOptions {
  bool realtime = false;
  bool measure_latency = false;  // record latency_ms also when not paced
  StreamControl* control = nullptr;
  std::function<void(const FeedbackFrame&)> on_frame;
};

// Appends one frame per hop to a copy of the session. Paced runs emit frame k
// when its last sample would have arrived (window + k*hop, scaled by speed);
// latency_ms runs from that moment to emission. Unpaced runs record 0 unless
// measure_latency is set, which keeps session files reproducible.
inline SessionRecord run_stream(const SessionRecord& session, const Recording& recording,
                                const StreamOptions& opts = {}) {
  using clock = std::chrono::steady_clock;
  StreamProcessor proc(session, recording);
  SessionRecord out = session;
  uint64_t seq = out.frames.empty() ? 0 : out.frames.back().seq + 1;
  const size_t n = proc.frame_count();
  out.frames.reserve(out.frames.size() + n);

  StreamControl local;
  StreamControl& control = opts.control ? *opts.control : local;
  const auto speed = [&] {
    const double s = control.speed.load();
    return s > 0.0 ? s : 1.0;
  };
  const auto seconds = [](double s) { return std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(s)); };

  auto deadline = clock::now() + seconds(proc.window_s() / speed());
  for (size_t k = 0; k < n; ++k) {
    if (control.cancel.load()) break;
    if (!control.running.load()) {
      while (!control.running.load() && !control.cancel.load()) std::this_thread::sleep_for(std::chrono::milliseconds(5));
      if (control.cancel.load()) break;
      deadline = clock::now() + seconds(proc.hop_s() / speed());
    }
    clock::time_point available;
    if (opts.realtime) {
      std::this_thread::sleep_until(deadline);
      available = deadline;
      deadline += seconds(proc.hop_s() / speed());
    } else {
      available = clock::now();
    }

    FeedbackFrame frame = proc.next(seq++);
    if (opts.realtime || opts.measure_latency)
      frame.latency_ms = std::chrono::duration<double, std::milli>(clock::now() - available).count();
    if (opts.on_frame) {
      try {
        opts.on_frame(frame);
      } catch (const std::exception& e) {
        throw Error(ErrorCode::StreamAborted, std::string("frame sink failed: ") + e.what());
      }
    }
    out.frames.push_back(std::move(frame));
  }
  return out;
}

// Phase-continuous audio for a frame log, one hop of sound per frame.
inline std::vector<AudioFrame> render_session_audio(const SessionRecord& session) {
  std::vector<AudioFrame> audio;
  audio.reserve(session.frames.size());
  double phase = 0.0;
  for (const auto& f : session.frames) {
    auto out = synthesize(f.sonification, session.config.hop_s, phase);
    phase = out.phase_out;
    audio.push_back(std::move(out.frame));
  }
  return audio;
}

// Running MetricsSummary so report requests never copy the frame log.
class SummaryAccumulator {
 public:
  void add(const FeedbackFrame& f) {
    std::lock_guard lock(mu_);
    ++count_;
    if (f.decision.reason == DecisionReason::AmbiguityZone) ++ambiguous_;
    if (f.veto.rejected) {
      ++vetoed_;
      return;
    }
    ++kept_;
    sum_l_ += f.l_idx;
    sum_d_ += f.delta_hfd;
    sum_p_ += f.p_move;
  }

  std::optional<MetricsSummary> snapshot() const {
    std::lock_guard lock(mu_);
    if (count_ == 0) return std::nullopt;
    MetricsSummary s;
    s.trial_count = static_cast<int64_t>(count_);
    if (kept_ > 0) {
      s.mean_l_idx = sum_l_ / static_cast<double>(kept_);
      s.mean_delta_hfd = sum_d_ / static_cast<double>(kept_);
      s.mean_p_move = sum_p_ / static_cast<double>(kept_);
    }
    s.veto_rate = static_cast<double>(vetoed_) / static_cast<double>(count_);
    s.ambiguity_rate = static_cast<double>(ambiguous_) / static_cast<double>(count_);
    return s;
  }

 private:
  mutable std::mutex mu_;
  size_t count_ = 0, kept_ = 0, vetoed_ = 0, ambiguous_ = 0;
  double sum_l_ = 0.0, sum_d_ = 0.0, sum_p_ = 0.0;
};

// ---------------------------------------------------------------------------
// Reports off the hot path

inline ClinicalReport generate_report(const MetricsSummary& summary, const std::string& endpoint, int timeout_ms,
                                      std::ostream& log = std::clog) {
  if (endpoint.empty()) return render_rule_report(summary);
  return request_llm_report(summary, endpoint, timeout_ms, log);
}

class ReportWorker {
 public:
  using Callback = std::function<void(const ClinicalReport&)>;

  ReportWorker(std::string endpoint, int timeout_ms, Callback done, std::ostream& log = std::clog)
      : endpoint_(std::move(endpoint)), timeout_ms_(timeout_ms), done_(std::move(done)), log_(log),
        thread_([this] { loop(); }) {}

  ReportWorker(const ReportWorker&) = delete;
  ReportWorker& operator=(const ReportWorker&) = delete;

  ~ReportWorker() {
    {
      std::lock_guard lock(mu_);
      quit_ = true;
    }
    cv_.notify_all();
    thread_.join();
  }

  void submit(MetricsSummary summary) {
    {
      std::lock_guard lock(mu_);
      pending_.push_back(std::move(summary));
    }
    cv_.notify_all();
  }

  // Blocks until every submitted report has been delivered.
  void drain() {
    std::unique_lock lock(mu_);
    idle_cv_.wait(lock, [&] { return pending_.empty() && !busy_; });
  }

 private:
  void loop() {
    std::unique_lock lock(mu_);
    for (;;) {
      cv_.wait(lock, [&] { return quit_ || !pending_.empty(); });
      if (pending_.empty()) return;
      auto summary = std::move(pending_.front());
      pending_.pop_front();
      busy_ = true;
      lock.unlock();
      const auto report = generate_report(summary, endpoint_, timeout_ms_, log_);
      if (done_) done_(report);
      lock.lock();
      busy_ = false;
      idle_cv_.notify_all();
    }
  }

  std::string endpoint_;
  int timeout_ms_;
  Callback done_;
  std::ostream& log_;
  std::mutex mu_;
  std::condition_variable cv_, idle_cv_;
  std::deque<MetricsSummary> pending_;
  bool busy_ = false;
  bool quit_ = false;
  std::thread thread_;
};

// ---------------------------------------------------------------------------
// Telemetry: newline-delimited JSON over TCP

enum class CommandKind { Start, Stop, SetSpeed, Report };

struct Command {
  CommandKind kind;
  double value = 0.0;
};

inline std::optional<Command> parse_command(std::string_view line) {
  const auto j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("cmd") || !j.at("cmd").is_string()) return std::nullopt;
  const auto cmd = j.at("cmd").get<std::string>();
  if (cmd == "start") return Command{CommandKind::Start};
  if (cmd == "stop") return Command{CommandKind::Stop};
  if (cmd == "report") return Command{CommandKind::Report};
  if (cmd == "set_speed") {
    if (!j.contains("value") || !j.at("value").is_number()) return std::nullopt;
    const double v = j.at("value").get<double>();
    if (!std::isfinite(v) || v <= 0.0 || v > 1000.0) return std::nullopt;
    return Command{CommandKind::SetSpeed, v};
  }
  return std::nullopt;
}

inline std::string bad_command_line() { return R"({"error":"bad_command"})"; }

class TelemetryServer {
 public:
  using Handler = std::function<nlohmann::json(const Command&)>;

  TelemetryServer(uint16_t port, Handler handler, std::string host = "127.0.0.1", size_t queue_capacity = 4096)
      : handler_(std::move(handler)), capacity_(queue_capacity) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw Error(ErrorCode::BindFailure, std::string("socket: ") + std::strerror(errno));
    const int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
      ::close(listen_fd_);
      throw Error(ErrorCode::BindFailure, "invalid bind address " + host);
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listen_fd_, 16) != 0) {
      const std::string why = std::strerror(errno);
      ::close(listen_fd_);
      throw Error(ErrorCode::BindFailure, "cannot listen on " + host + ":" + std::to_string(port) + ": " + why);
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    accept_thread_ = std::thread([this] { accept_loop(); });
  }

  TelemetryServer(const TelemetryServer&) = delete;
  TelemetryServer& operator=(const TelemetryServer&) = delete;
  ~TelemetryServer() { stop(); }

  uint16_t port() const { return port_; }

  // Never blocks on a client: a full queue drops its oldest line.
  void broadcast(const std::string& line) {
    std::lock_guard lock(clients_mu_);
    for (auto& c : clients_) c->enqueue(line, capacity_, dropped_);
  }

  size_t client_count() const {
    std::lock_guard lock(clients_mu_);
    size_t n = 0;
    for (const auto& c : clients_) n += !c->closed.load();
    return n;
  }

  uint64_t dropped_lines() const { return dropped_.load(); }

  // Flushes queued lines to connected clients, then closes everything.
  void stop() {
    if (stopping_.exchange(true)) return;
    accept_thread_.join();
    ::close(listen_fd_);
    std::lock_guard lock(clients_mu_);
    for (auto& c : clients_) c->finish();
    clients_.clear();
  }

 private:
  struct Client {
    int fd = -1;
    std::mutex mu;
    std::condition_variable cv;
    std::deque<std::string> queue;
    std::atomic<bool> closed{false};
    bool draining = false;
    std::thread reader, writer;

    void enqueue(std::string line, size_t capacity, std::atomic<uint64_t>& dropped) {
      if (closed.load()) return;
      {
        std::lock_guard lock(mu);
        if (queue.size() >= capacity) {
          queue.pop_front();
          ++dropped;
        }
        queue.push_back(std::move(line));
      }
      cv.notify_one();
    }

    void close_now() {
      closed = true;
      cv.notify_all();
    }

    void finish() {
      {
        std::lock_guard lock(mu);
        draining = true;
      }
      cv.notify_all();
      if (writer.joinable()) writer.join();
      ::shutdown(fd, SHUT_RDWR);
      if (reader.joinable()) reader.join();
      ::close(fd);
    }
  };

  void accept_loop() {
    while (!stopping_.load()) {
      pollfd p{listen_fd_, POLLIN, 0};
      if (::poll(&p, 1, 50) <= 0) {
        reap();
        continue;
      }
      const int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) continue;
      timeval send_timeout{2, 0};  // a stalled reader cannot wedge shutdown
      ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &send_timeout, sizeof send_timeout);
      auto client = std::make_shared<Client>();
      client->fd = fd;
      client->writer = std::thread([client] { write_loop(*client); });
      client->reader = std::thread([this, client] { read_loop(*client); });
      std::lock_guard lock(clients_mu_);
      clients_.push_back(std::move(client));
    }
  }

  // Joins clients that disconnected on their own.
  void reap() {
    std::list<std::shared_ptr<Client>> dead;
    {
      std::lock_guard lock(clients_mu_);
      for (auto it = clients_.begin(); it != clients_.end();) {
        if ((*it)->closed.load()) {
          dead.push_back(*it);
          it = clients_.erase(it);
        } else {
          ++it;
        }
      }
    }
    for (auto& c : dead) {
      c->cv.notify_all();
      ::shutdown(c->fd, SHUT_RDWR);
      if (c->writer.joinable()) c->writer.join();
      if (c->reader.joinable()) c->reader.join();
      ::close(c->fd);
    }
  }

  static void write_loop(Client& c) {
    std::unique_lock lock(c.mu);
    for (;;) {
      c.cv.wait(lock, [&] { return c.closed.load() || c.draining || !c.queue.empty(); });
      if (c.closed.load()) return;
      if (c.queue.empty()) return;  // draining and flushed
      std::string line = std::move(c.queue.front());
      c.queue.pop_front();
      lock.unlock();
      line.push_back('\n');
      size_t sent = 0;
      while (sent < line.size()) {
        const auto r = ::send(c.fd, line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
        if (r <= 0) {
          if (r < 0 && errno == EINTR) continue;
          c.close_now();
          return;
        }
        sent += static_cast<size_t>(r);
      }
      lock.lock();
    }
  }

  void read_loop(Client& c) {
    std::string pending;
    char buf[4096];
    for (;;) {
      const auto r = ::recv(c.fd, buf, sizeof buf, 0);
      if (r < 0 && errno == EINTR) continue;
      if (r <= 0) break;
      pending.append(buf, static_cast<size_t>(r));
      if (pending.size() > (1u << 20)) {
        c.enqueue(bad_command_line(), capacity_, dropped_);
        pending.clear();
      }
      for (auto nl = pending.find('\n'); nl != std::string::npos; nl = pending.find('\n')) {
        std::string line = pending.substr(0, nl);
        pending.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const auto cmd = parse_command(line);
        std::string reply;
        if (!cmd) {
          reply = bad_command_line();
        } else {
          try {
            reply = handler_(*cmd).dump();
          } catch (const std::exception& e) {
            reply = nlohmann::json{{"error", e.what()}}.dump();
          }
        }
        c.enqueue(std::move(reply), capacity_, dropped_);
      }
    }
    std::lock_guard lock(c.mu);
    if (!c.draining) c.close_now();
  }

  Handler handler_;
  size_t capacity_;
  int listen_fd_ = -1;
  uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::atomic<uint64_t> dropped_{0};
  mutable std::mutex clients_mu_;
  std::list<std::shared_ptr<Client>> clients_;
  std::thread accept_thread_;
};

inline nlohmann::json report_message(const ClinicalReport& r) {
  return {{"type", "report"}, {"body", r.body}, {"source", to_string(r.source)}, {"verified", r.verified}};
}

struct ServeOptions {
  uint16_t port = 8765;
  std::string host = "127.0.0.1";
  bool wait_for_start = false;
  double speed = 1.0;
  std::string llm_endpoint;
  int llm_timeout_ms = 2000;
  std::function<void(uint16_t)> on_listening;  // called once the port is bound
};

// Streams a recording in real time to every connected client. Reports run on
// a worker thread, at session end and on the "report" command.
inline SessionRecord serve_session(const SessionRecord& session, const Recording& recording, const ServeOptions& opts,
                                   std::ostream& log = std::clog) {
  StreamControl control;
  control.speed = opts.speed;
  control.running = !opts.wait_for_start;
  SummaryAccumulator summary;
  std::mutex reports_mu;
  std::vector<ClinicalReport> reports;
  std::atomic<TelemetryServer*> server_ptr{nullptr};

  ReportWorker worker(
      opts.llm_endpoint, opts.llm_timeout_ms,
      [&](const ClinicalReport& r) {
        {
          std::lock_guard lock(reports_mu);
          reports.push_back(r);
        }
        if (auto* srv = server_ptr.load()) srv->broadcast(report_message(r).dump());
      },
      log);

  TelemetryServer server(
      opts.port,
      [&](const Command& cmd) -> nlohmann::json {
        switch (cmd.kind) {
          case CommandKind::Start:
            control.running = true;
            return {{"ack", "start"}};
          case CommandKind::Stop:
            control.running = false;
            return {{"ack", "stop"}};
          case CommandKind::SetSpeed:
            control.speed = cmd.value;
            return {{"ack", "set_speed"}, {"value", cmd.value}};
          case CommandKind::Report: {
            const auto snap = summary.snapshot();
            if (!snap) return {{"error", "empty_session"}};
            worker.submit(*snap);
            return {{"ack", "report"}};
          }
        }
        return nlohmann::json{{"error", "bad_command"}};
      },
      opts.host);
  server_ptr = &server;
  if (opts.on_listening) opts.on_listening(server.port());
  log << "serve: listening on " << opts.host << ":" << server.port() << "\n";

  StreamOptions so;
  so.realtime = true;
  so.control = &control;
  so.on_frame = [&](const FeedbackFrame& f) {
    server.broadcast(to_json(f).dump());
    summary.add(f);
  };
  SessionRecord out = run_stream(session, recording, so);

  if (const auto snap = summary.snapshot()) worker.submit(*snap);
  worker.drain();
  server.broadcast(nlohmann::json{{"type", "end"}, {"frames", out.frames.size()}}.dump());
  server.stop();
  server_ptr = nullptr;
  std::lock_guard lock(reports_mu);
  out.reports.insert(out.reports.end(), reports.begin(), reports.end());
  return out;
}

}  // namespace omnineuro
