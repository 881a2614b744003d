#pragma once

// Session reports. The rule-based renderer is the local, always-available
// path; the remote client posts metrics to an LLM gateway and falls back to
// the rule-based text on any failure.

#include <httplib.h>
#undef _res  // from <resolv.h>; clashes with Eigen parameter names
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <future>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <thread>

#include "omnineuro/error.hpp"
#include "omnineuro/frame.hpp"

namespace omnineuro {

struct MetricsSummary {
  int64_t trial_count = 0;
  double mean_l_idx = 0.0;
  double mean_delta_hfd = 0.0;
  double mean_p_move = 0.0;
  double veto_rate = 0.0;
  double ambiguity_rate = 0.0;
  std::optional<std::map<std::string, double>> per_class_accuracy;

  bool operator==(const MetricsSummary&) const = default;
};

enum class ReportSource { RuleBased, RemoteLLM };

constexpr std::string_view to_string(ReportSource s) {
  return s == ReportSource::RemoteLLM ? "RemoteLLM" : "RuleBased";
}

struct ClinicalReport {
  std::string body;
  ReportSource source = ReportSource::RuleBased;
  bool verified = false;

  bool operator==(const ClinicalReport&) const = default;
};

inline constexpr std::string_view kVerificationFooter =
    "REQUIRES HUMAN VERIFICATION: decision-support output only; a clinician must review this report before any "
    "medical intervention.";
inline constexpr std::string_view kArtifactAdvice =
    "Frequent artifact rejections: relax jaw/face muscles and check electrode contact before the next block.";
inline constexpr std::string_view kLateralizationAdvice =
    "Weak lateralization: energy is similar over both motor areas; focus the imagery on one hand at a time.";
inline constexpr std::string_view kConsistencyAdvice =
    "Many ambiguous frames: keep one consistent imagery strategy per trial instead of switching.";

inline constexpr double kVetoAdviceRate = 0.3;
inline constexpr double kWeakLateralization = 0.1;
inline constexpr double kAmbiguityAdviceRate = 0.5;

// Means over non-vetoed frames (0 when every frame was vetoed); both rates
// over all frames.
inline MetricsSummary summarize(std::span<const FeedbackFrame> frames) {
  if (frames.empty()) throw Error(ErrorCode::EmptySession, "session has no frames");
  MetricsSummary s;
  s.trial_count = static_cast<int64_t>(frames.size());
  size_t kept = 0, vetoed = 0, ambiguous = 0;
  for (const auto& f : frames) {
    if (f.decision.reason == DecisionReason::AmbiguityZone) ++ambiguous;
    if (f.veto.rejected) {
      ++vetoed;
      continue;
    }
    ++kept;
    s.mean_l_idx += f.l_idx;
    s.mean_delta_hfd += f.delta_hfd;
    s.mean_p_move += f.p_move;
  }
  if (kept > 0) {
    s.mean_l_idx /= static_cast<double>(kept);
    s.mean_delta_hfd /= static_cast<double>(kept);
    s.mean_p_move /= static_cast<double>(kept);
  }
  s.veto_rate = static_cast<double>(vetoed) / static_cast<double>(frames.size());
  s.ambiguity_rate = static_cast<double>(ambiguous) / static_cast<double>(frames.size());
  return s;
}

inline std::string format_fixed(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

inline ClinicalReport render_rule_report(const MetricsSummary& s) {
  std::string body;
  body += "Neurofeedback session report (rule-based)\n";
  body += "Frames analysed: " + std::to_string(s.trial_count) + "\n";
  body += "Energy lateralization L_idx (mean): " + format_fixed("%+.4f", s.mean_l_idx) + "\n";
  body += "Complexity difference dHFD (mean): " + format_fixed("%+.4f", s.mean_delta_hfd) + "\n";
  body += "Movement probability P_move (mean): " + format_fixed("%.4f", s.mean_p_move) + "\n";
  body += "Artifact veto rate: " + format_fixed("%.1f%%", 100.0 * s.veto_rate) + "\n";
  body += "Ambiguity rate: " + format_fixed("%.1f%%", 100.0 * s.ambiguity_rate) + "\n";
  if (s.per_class_accuracy) {
    for (const auto& [cls, acc] : *s.per_class_accuracy)
      body += "Accuracy (" + cls + "): " + format_fixed("%.1f%%", 100.0 * acc) + "\n";
  }

  std::vector<std::string_view> advice;
  if (s.veto_rate > kVetoAdviceRate) advice.push_back(kArtifactAdvice);
  if (std::abs(s.mean_l_idx) < kWeakLateralization) advice.push_back(kLateralizationAdvice);
  if (s.ambiguity_rate > kAmbiguityAdviceRate) advice.push_back(kConsistencyAdvice);
  if (!advice.empty()) {
    body += "\nAdvice:\n";
    for (const auto a : advice) body += "- " + std::string(a) + "\n";
  }
  body += "\n" + std::string(kVerificationFooter) + "\n";
  return {body, ReportSource::RuleBased, false};
}

inline nlohmann::json to_json(const MetricsSummary& s) {
  nlohmann::json j{{"trial_count", s.trial_count},       {"mean_l_idx", s.mean_l_idx},
                   {"mean_delta_hfd", s.mean_delta_hfd}, {"mean_p_move", s.mean_p_move},
                   {"veto_rate", s.veto_rate},           {"ambiguity_rate", s.ambiguity_rate}};
  if (s.per_class_accuracy) j["per_class_accuracy"] = *s.per_class_accuracy;
  return j;
}

inline constexpr std::string_view kReportTemplateId = "omnineuro.clinical-report.v1";

// Guardrail instructions sent along with the metrics.
inline constexpr std::string_view kReportPromptTemplate =
    "You are assisting a clinician who runs motor-imagery neurofeedback. Using ONLY the metrics provided "
    "(L_idx: log energy ratio C4/C3; dHFD: Higuchi fractal dimension C3 minus C4; P_move: movement "
    "probability; veto and ambiguity rates), write short, practical training advice for the patient. "
    "Do not diagnose. Do not speculate beyond the metrics. Cite the metric behind every statement. "
    "End with a note that the report requires clinician verification.";

inline nlohmann::json llm_request_body(const MetricsSummary& s) {
  return {{"template_id", kReportTemplateId},
          {"prompt", kReportPromptTemplate},
          {"metrics", to_json(s)},
          {"constraints", {"no-diagnosis", "advice-only", "cite-metrics"}}};
}

struct Endpoint {
  std::string host;
  int port = 80;
  std::string path = "/";
};

// Accepts http://host[:port][/path].
inline std::optional<Endpoint> parse_endpoint(std::string_view url) {
  constexpr std::string_view scheme = "http://";
  if (url.substr(0, scheme.size()) != scheme) return std::nullopt;
  url.remove_prefix(scheme.size());
  Endpoint ep;
  const auto slash = url.find('/');
  const auto authority = url.substr(0, slash);
  if (slash != std::string_view::npos) ep.path = std::string(url.substr(slash));
  const auto colon = authority.rfind(':');
  ep.host = std::string(authority.substr(0, colon));
  if (colon != std::string_view::npos) {
    try {
      ep.port = std::stoi(std::string(authority.substr(colon + 1)));
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }
  if (ep.host.empty() || ep.port <= 0 || ep.port > 65535) return std::nullopt;
  return ep;
}

inline ClinicalReport with_footer(ClinicalReport report) {
  if (report.body.find(kVerificationFooter) == std::string::npos) {
    if (!report.body.empty() && report.body.back() != '\n') report.body += '\n';
    report.body += "\n" + std::string(kVerificationFooter) + "\n";
  }
  return report;
}

// Never throws and never waits longer than timeout_ms for the remote side;
// any failure yields the rule-based report. The HTTP call runs on its own
// detached thread so a hung peer cannot hold the caller.
inline ClinicalReport request_llm_report(const MetricsSummary& summary, const std::string& endpoint_url, int timeout_ms,
                                         std::ostream& log = std::clog) {
  const auto fallback = [&](const std::string& why) {
    log << "report: remote generation failed (" << why << "); using rule-based template\n";
    return render_rule_report(summary);
  };
  const auto endpoint = parse_endpoint(endpoint_url);
  if (!endpoint) return fallback("unsupported endpoint '" + endpoint_url + "'");
  if (timeout_ms <= 0) return fallback("non-positive timeout");

  auto result = std::make_shared<std::promise<std::optional<std::string>>>();
  auto future = result->get_future();
  const std::string body = llm_request_body(summary).dump();
  std::thread([result, ep = *endpoint, body, timeout_ms] {
    std::optional<std::string> text;
    try {
      httplib::Client client(ep.host, ep.port);
      const auto t = std::chrono::milliseconds(timeout_ms);
      client.set_connection_timeout(t);
      client.set_read_timeout(t);
      client.set_write_timeout(t);
      if (auto res = client.Post(ep.path, body, "application/json"); res && res->status == 200) text = res->body;
    } catch (...) {
    }
    result->set_value(std::move(text));
  }).detach();

  if (future.wait_for(std::chrono::milliseconds(timeout_ms)) != std::future_status::ready)
    return fallback("timeout after " + std::to_string(timeout_ms) + " ms");
  auto text = future.get();
  if (!text) return fallback("no HTTP 200 response");
  if (text->empty()) return fallback("empty response body");
  return with_footer({*text, ReportSource::RemoteLLM, false});
}

}  // namespace omnineuro
