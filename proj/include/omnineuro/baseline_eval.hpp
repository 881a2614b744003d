#pragma once

// Offline evaluation: CSP+LDA baseline, stratified k-fold cross-validation of
// both pipelines, the Wilcoxon signed-rank test and the inter-trial variance
// reduction metric.

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "omnineuro/artifact_veto.hpp"
#include "omnineuro/error.hpp"
#include "omnineuro/features.hpp"
#include "omnineuro/fusion.hpp"
#include "omnineuro/quantum_engine.hpp"
#include "omnineuro/signal_io.hpp"
#include "omnineuro/synthetic.hpp"

namespace omnineuro {

// ---------------------------------------------------------------------------
// CSP

inline Eigen::MatrixXd window_matrix(const EpochWindow& w) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(w.n_channels()), static_cast<Eigen::Index>(w.n_samples()));
  for (size_t c = 0; c < w.n_channels(); ++c)
    x.row(static_cast<Eigen::Index>(c)) =
        Eigen::Map<const Eigen::RowVectorXd>(w.data[c].data(), static_cast<Eigen::Index>(w.n_samples()));
  return x;
}

// Trace-normalised spatial covariance of a channel-centred window.
inline Eigen::MatrixXd normalized_covariance(const EpochWindow& w) {
  Eigen::MatrixXd x = window_matrix(w);
  x.colwise() -= x.rowwise().mean();
  const Eigen::MatrixXd c = x * x.transpose();
  const double tr = c.trace();
  if (!(tr > 0.0)) throw Error(ErrorCode::SingularCovariance, "window with zero total variance");
  return c / tr;
}

struct CspModel {
  Eigen::MatrixXd filters;      // n_components x n_channels; largest eigenvalues first
  Eigen::VectorXd eigenvalues;  // all generalized eigenvalues, ascending
  Eigen::VectorXd selected;     // eigenvalue of each kept filter, in filter order

  // Normalised log-variance of each spatially filtered component.
  std::vector<double> features(const EpochWindow& w) const {
    Eigen::MatrixXd x = window_matrix(w);
    x.colwise() -= x.rowwise().mean();
    const Eigen::MatrixXd z = filters * x;
    const Eigen::VectorXd var = z.rowwise().squaredNorm();
    const double total = var.sum();
    std::vector<double> out(static_cast<size_t>(var.size()));
    for (Eigen::Index i = 0; i < var.size(); ++i) out[static_cast<size_t>(i)] = std::log(var(i) / total);
    return out;
  }
};

inline Eigen::MatrixXd class_covariance(std::span<const EpochWindow> trials) {
  Eigen::MatrixXd sum = normalized_covariance(trials.front());
  for (size_t i = 1; i < trials.size(); ++i) sum += normalized_covariance(trials[i]);
  sum /= static_cast<double>(trials.size());
  const auto n = static_cast<double>(sum.rows());
  sum.diagonal().array() += 1e-6 * sum.trace() / n;
  return sum;
}

// Solves cov_a w = lambda (cov_a + cov_b) w and keeps n_components/2
// eigenvectors from each end of the spectrum.
inline CspModel csp_fit(std::span<const EpochWindow> trials_a, std::span<const EpochWindow> trials_b, int n_components) {
  if (trials_a.size() < 2 || trials_b.size() < 2) throw Error(ErrorCode::InsufficientTrials, "CSP needs 2 trials per class");
  const auto n_ch = static_cast<int>(trials_a.front().n_channels());
  for (const auto& t : trials_a)
    if (static_cast<int>(t.n_channels()) != n_ch) throw Error(ErrorCode::InvalidArgument, "inconsistent channel count");
  for (const auto& t : trials_b)
    if (static_cast<int>(t.n_channels()) != n_ch) throw Error(ErrorCode::InvalidArgument, "inconsistent channel count");
  if (n_components < 2 || n_components % 2 != 0 || n_components > n_ch)
    throw Error(ErrorCode::InvalidArgument, "n_components must be even and at most the channel count");

  const Eigen::MatrixXd cov_a = class_covariance(trials_a);
  const Eigen::MatrixXd cov_b = class_covariance(trials_b);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov_a, cov_a + cov_b);
  if (solver.info() != Eigen::Success) throw Error(ErrorCode::SingularCovariance, "generalized eigenproblem failed");

  CspModel model;
  model.eigenvalues = solver.eigenvalues();
  const Eigen::MatrixXd& vecs = solver.eigenvectors();
  const int half = n_components / 2;
  model.filters.resize(n_components, n_ch);
  model.selected.resize(n_components);
  for (int i = 0; i < half; ++i) {
    model.filters.row(i) = vecs.col(n_ch - 1 - i).transpose();
    model.selected(i) = model.eigenvalues(n_ch - 1 - i);
    model.filters.row(half + i) = vecs.col(i).transpose();
    model.selected(half + i) = model.eigenvalues(i);
  }
  return model;
}

// ---------------------------------------------------------------------------
// LDA

struct LabeledRow {
  std::vector<double> x;
  TrialLabel label = TrialLabel::Left;  // Left = class 0, Right = class 1
};

struct LdaModel {
  Eigen::VectorXd weights;
  double bias = 0.0;
  TrialLabel tie = TrialLabel::Left;

  double discriminant(const std::vector<double>& x) const {
    return weights.dot(Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()))) + bias;
  }

  TrialLabel predict(const std::vector<double>& x) const {
    const double d = discriminant(x);
    if (d > 0.0) return TrialLabel::Right;
    if (d < 0.0) return TrialLabel::Left;
    return tie;
  }
};

// Fisher LDA with a shared covariance shrunk toward its mean eigenvalue:
// (1 - shrinkage) S + shrinkage * tr(S)/d * I. Equal priors; an exact zero
// discriminant goes to the larger training class.
inline LdaModel lda_fit(std::span<const LabeledRow> train, double shrinkage = 0.1) {
  if (train.empty()) throw Error(ErrorCode::InsufficientData, "empty LDA training set");
  const auto d = static_cast<Eigen::Index>(train.front().x.size());
  Eigen::VectorXd mean[2] = {Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d)};
  size_t count[2] = {0, 0};
  for (const auto& r : train) {
    if (static_cast<Eigen::Index>(r.x.size()) != d) throw Error(ErrorCode::InvalidArgument, "ragged LDA rows");
    if (r.label == TrialLabel::Rest) throw Error(ErrorCode::InvalidArgument, "LDA labels must be Left or Right");
    const int k = r.label == TrialLabel::Right ? 1 : 0;
    mean[k] += Eigen::Map<const Eigen::VectorXd>(r.x.data(), d);
    ++count[k];
  }
  if (count[0] == 0 || count[1] == 0) throw Error(ErrorCode::SingleClassData, "LDA needs both classes");
  for (int k = 0; k < 2; ++k) mean[k] /= static_cast<double>(count[k]);

  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(d, d);
  for (const auto& r : train) {
    const int k = r.label == TrialLabel::Right ? 1 : 0;
    const Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(r.x.data(), d) - mean[k];
    scatter += c * c.transpose();
  }
  const auto n = static_cast<double>(train.size());
  scatter /= n > 2.0 ? n - 2.0 : n;
  const double mu = scatter.trace() / static_cast<double>(d);
  Eigen::MatrixXd shrunk = (1.0 - shrinkage) * scatter;
  shrunk.diagonal().array() += shrinkage * mu;

  Eigen::LDLT<Eigen::MatrixXd> ldlt(shrunk);
  if (ldlt.info() != Eigen::Success || !(mu > 0.0) || !ldlt.isPositive())
    throw Error(ErrorCode::SingularCovariance, "shared covariance is singular");

  LdaModel model;
  model.weights = ldlt.solve(mean[1] - mean[0]);
  model.bias = -model.weights.dot((mean[0] + mean[1]) / 2.0);
  model.tie = count[1] > count[0] ? TrialLabel::Right : TrialLabel::Left;
  return model;
}

inline std::vector<TrialLabel> lda_fit_predict(std::span<const LabeledRow> train,
                                               std::span<const std::vector<double>> test, double shrinkage = 0.1) {
  const auto model = lda_fit(train, shrinkage);
  std::vector<TrialLabel> out;
  out.reserve(test.size());
  for (const auto& x : test) out.push_back(model.predict(x));
  return out;
}

// ---------------------------------------------------------------------------
// Cross-validation

enum class Pipeline { Baseline, OmniNeuro };

constexpr std::string_view to_string(Pipeline p) { return p == Pipeline::Baseline ? "baseline" : "omnineuro"; }

struct EvalConfig {
  EngineConfig engines;
  int csp_components = 4;
  double lda_shrinkage = 0.1;
  TrainOptions autoencoder{0, 200, 0.05, 0};  // seed is derived per fold
  double window_offset_s = 0.5;
  double window_length_s = 2.0;
  FilterSpec filter{8.0, 30.0, 4, FilterMode::ZeroPhase};
};

struct CrossvalResult {
  double accuracy = 0.0;                 // mean of per-fold accuracies
  std::vector<double> fold_accuracy;
  std::vector<int> fold_of_trial;        // test fold of every trial
  std::vector<DecisionClass> predicted;  // per trial, from its test fold
};

// Uniform integer in [0, bound) without modulo bias, independent of the
// standard library's distribution implementations.
inline uint64_t bounded_draw(std::mt19937_64& rng, uint64_t bound) {
  const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  uint64_t v;
  do v = rng();
  while (v >= limit);
  return v % bound;
}

// Per class: Fisher-Yates shuffle, then round-robin over folds, continuing
// the rotation across classes.
inline std::vector<int> stratified_folds(std::span<const TrialLabel> labels, int k_folds, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<int> fold(labels.size(), -1);
  int next = 0;
  for (const auto cls : {TrialLabel::Left, TrialLabel::Right, TrialLabel::Rest}) {
    std::vector<size_t> idx;
    for (size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) idx.push_back(i);
    for (size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[bounded_draw(rng, i)]);
    for (const auto i : idx) {
      fold[i] = next;
      next = (next + 1) % k_folds;
    }
  }
  return fold;
}

inline DecisionClass as_decision_class(TrialLabel l) {
  return l == TrialLabel::Right ? DecisionClass::Right : DecisionClass::Left;
}

// Trials must be labelled Left or Right. OmniNeuro predictions count as
// correct only when the gated decision names the true class; Neutral is
// always an error.
inline CrossvalResult crossval(std::span<const EpochWindow> trials, int k_folds, Pipeline pipeline, uint64_t seed,
                               const EvalConfig& cfg = {}) {
  if (k_folds < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 folds");
  std::vector<TrialLabel> labels;
  size_t n_left = 0, n_right = 0;
  for (const auto& t : trials) {
    if (!t.label || *t.label == TrialLabel::Rest) throw Error(ErrorCode::InvalidArgument, "trials must be Left or Right");
    labels.push_back(*t.label);
    (*t.label == TrialLabel::Left ? n_left : n_right)++;
  }
  if (n_left < static_cast<size_t>(k_folds) || n_right < static_cast<size_t>(k_folds))
    throw Error(ErrorCode::InsufficientTrials, "need at least k_folds trials per class");

  CrossvalResult result;
  result.fold_of_trial = stratified_folds(labels, k_folds, seed);
  result.predicted.assign(trials.size(), DecisionClass::Neutral);

  // Per-trial engine outputs do not depend on the fold.
  std::vector<WindowFeatures> engine;
  std::vector<FeatureRow> raw;
  if (pipeline == Pipeline::OmniNeuro) {
    for (const auto& t : trials) {
      engine.push_back(extract_features(t, cfg.engines));
      raw.push_back(raw_window_features(t));
    }
  }

  for (int f = 0; f < k_folds; ++f) {
    std::vector<size_t> train_idx, test_idx;
    for (size_t i = 0; i < trials.size(); ++i) (result.fold_of_trial[i] == f ? test_idx : train_idx).push_back(i);

    if (pipeline == Pipeline::Baseline) {
      std::vector<EpochWindow> a, b;
      for (const auto i : train_idx) (labels[i] == TrialLabel::Left ? a : b).push_back(trials[i]);
      const auto csp = csp_fit(a, b, cfg.csp_components);
      std::vector<LabeledRow> train;
      for (const auto i : train_idx) train.push_back({csp.features(trials[i]), labels[i]});
      const auto lda = lda_fit(train, cfg.lda_shrinkage);
      for (const auto i : test_idx) result.predicted[i] = as_decision_class(lda.predict(csp.features(trials[i])));
    } else {
      std::vector<LabeledFeature> calib;
      std::vector<FeatureRow> raw_train;
      for (const auto i : train_idx) {
        if (!engine[i].degenerate) calib.push_back({engine[i].vector, labels[i]});
        raw_train.push_back(raw[i]);
      }
      const auto weights = calibrate(calib);
      const auto scaler = FeatureScaler::fit(raw_train);
      std::vector<FeatureRow> z_train;
      for (const auto& r : raw_train) z_train.push_back(scaler.apply(r));
      auto ae_opts = cfg.autoencoder;
      ae_opts.seed = seed * 1000003u + static_cast<uint64_t>(f);
      const auto ae = train(z_train, ae_opts);
      const double threshold = calibrate_threshold(ae, z_train);
      QuantumConfig qcfg;
      qcfg.gain = weights.quantum_gain;
      for (const auto i : test_idx) {
        const auto v = veto(ae, scaler.apply(raw[i]), threshold);
        const double p = p_move(score_to_theta(fuse(engine[i].vector, weights), qcfg));
        result.predicted[i] = decide(p, v, engine[i].degenerate).cls;
      }
    }

    size_t correct = 0;
    for (const auto i : test_idx) correct += result.predicted[i] == as_decision_class(labels[i]);
    result.fold_accuracy.push_back(static_cast<double>(correct) / static_cast<double>(test_idx.size()));
  }
  result.accuracy = std::accumulate(result.fold_accuracy.begin(), result.fold_accuracy.end(), 0.0) /
                    static_cast<double>(k_folds);
  return result;
}

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank

struct WilcoxonResult {
  double p = 1.0;
  double w_plus = 0.0;  // sum of ranks of positive differences
  size_t n = 0;         // non-zero differences
  bool exact = true;
};

// Ranks of |d| with ties given their mid-rank, returned doubled so they are
// integers.
inline std::vector<long> doubled_midranks(std::span<const double> abs_diffs) {
  std::vector<size_t> order(abs_diffs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return abs_diffs[a] < abs_diffs[b]; });
  std::vector<long> ranks(abs_diffs.size());
  for (size_t i = 0; i < order.size();) {
    size_t j = i;
    while (j + 1 < order.size() && abs_diffs[order[j + 1]] == abs_diffs[order[i]]) ++j;
    const auto doubled = static_cast<long>(i + 1 + j + 1);  // 2 * mean of ranks i+1..j+1
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = doubled;
    i = j + 1;
  }
  return ranks;
}

// Two-sided test on b - a. Zeros are dropped; exact null distribution for
// n <= 25, normal approximation with tie and continuity correction above.
inline WilcoxonResult wilcoxon_signed_rank_test(std::span<const std::pair<double, double>> paired) {
  std::vector<double> abs_d;
  std::vector<bool> positive;
  for (const auto& [a, b] : paired) {
    const double d = b - a;
    if (d == 0.0) continue;
    abs_d.push_back(std::abs(d));
    positive.push_back(d > 0.0);
  }
  if (abs_d.size() < 5) throw Error(ErrorCode::TooFewPairs, "need at least 5 non-zero differences");

  WilcoxonResult r;
  r.n = abs_d.size();
  const auto ranks = doubled_midranks(abs_d);
  long w2 = 0, total2 = 0;
  for (size_t i = 0; i < ranks.size(); ++i) {
    total2 += ranks[i];
    if (positive[i]) w2 += ranks[i];
  }
  r.w_plus = static_cast<double>(w2) / 2.0;

  if (r.n <= 25) {
    // counts[s] = number of sign assignments whose doubled W+ equals s.
    std::vector<double> counts(static_cast<size_t>(total2) + 1, 0.0);
    counts[0] = 1.0;
    long reach = 0;
    for (const long rk : ranks) {
      for (long s = reach; s >= 0; --s) counts[static_cast<size_t>(s + rk)] += counts[static_cast<size_t>(s)];
      reach += rk;
    }
    const double all = std::ldexp(1.0, static_cast<int>(r.n));
    double lower = 0.0, upper = 0.0;
    for (long s = 0; s <= total2; ++s) {
      if (s <= w2) lower += counts[static_cast<size_t>(s)];
      if (s >= w2) upper += counts[static_cast<size_t>(s)];
    }
    r.p = std::min(1.0, 2.0 * std::min(lower, upper) / all);
    return r;
  }

  r.exact = false;
  const auto n = static_cast<double>(r.n);
  double tie_term = 0.0;
  {
    std::vector<long> sorted = ranks;
    std::sort(sorted.begin(), sorted.end());
    for (size_t i = 0; i < sorted.size();) {
      size_t j = i;
      while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
      const auto t = static_cast<double>(j - i);
      tie_term += t * t * t - t;
      i = j;
    }
  }
  const double mean = n * (n + 1.0) / 4.0;
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
  const double dev = std::abs(r.w_plus - mean) - 0.5;
  r.p = dev <= 0.0 ? 1.0 : std::min(1.0, std::erfc(dev / std::sqrt(var) / std::sqrt(2.0)));
  return r;
}

inline double wilcoxon_signed_rank(std::span<const std::pair<double, double>> paired) {
  return wilcoxon_signed_rank_test(paired).p;
}

// ---------------------------------------------------------------------------
// Variance reduction

// Dimensions: (l_idx, delta_hfd). Sample variance per dimension.
inline double mean_dimension_variance(std::span<const FeatureVector> set) {
  const auto n = static_cast<double>(set.size());
  double m0 = 0, m1 = 0;
  for (const auto& f : set) {
    m0 += f.l_idx;
    m1 += f.delta_hfd;
  }
  m0 /= n;
  m1 /= n;
  double v0 = 0, v1 = 0;
  for (const auto& f : set) {
    v0 += (f.l_idx - m0) * (f.l_idx - m0);
    v1 += (f.delta_hfd - m1) * (f.delta_hfd - m1);
  }
  return (v0 + v1) / (2.0 * (n - 1.0));
}

// 1 - var(b)/var(a); positive when condition b is more consistent.
inline double variance_reduction(std::span<const FeatureVector> condition_a, std::span<const FeatureVector> condition_b) {
  if (condition_a.size() < 2 || condition_b.size() < 2)
    throw Error(ErrorCode::InsufficientData, "need at least 2 vectors per condition");
  const double va = mean_dimension_variance(condition_a);
  if (!(va > 0.0)) throw Error(ErrorCode::DegenerateCondition, "condition a has zero variance");
  return 1.0 - mean_dimension_variance(condition_b) / va;
}

// ---------------------------------------------------------------------------
// Cohort evaluation

// Smallest accuracy k/n with P(X >= k) <= alpha/2 under Binomial(n, 1/2):
// accuracies at or above this value are outside the two-sided chance band.
inline double binomial_chance_upper(size_t n, double alpha = 0.05) {
  if (n == 0) return 1.0;
  std::vector<double> log_fact(n + 1, 0.0);
  for (size_t i = 1; i <= n; ++i) log_fact[i] = log_fact[i - 1] + std::log(static_cast<double>(i));
  double tail = 0.0;
  for (size_t k = n + 1; k-- > 0;) {
    const double pk = std::exp(log_fact[n] - log_fact[k] - log_fact[n - k] - static_cast<double>(n) * std::log(2.0));
    if (tail + pk > alpha / 2.0) return static_cast<double>(k + 1) / static_cast<double>(n);
    tail += pk;
  }
  return 0.0;
}

struct SubjectData {
  std::string id;
  std::vector<EpochWindow> trials;
};

struct SubjectScore {
  std::string id;
  size_t n_trials = 0;
  double baseline = 0.0;
  double omnineuro = 0.0;
  double chance_upper = 1.0;
};

struct EvalResult {
  std::vector<SubjectScore> subjects;
  double mean_baseline = 0.0;
  double mean_omnineuro = 0.0;
  std::optional<double> wilcoxon_p;
  std::optional<double> variance_reduction;
  std::optional<double> responsive_threshold;
  std::optional<double> responsive_baseline;
  std::optional<double> responsive_omnineuro;
  int folds = 5;
  uint64_t seed = 0;
};

inline SubjectData synthetic_subject(const std::string& id, const SyntheticSpec& spec, const EvalConfig& cfg = {}) {
  const auto rec = bandpass(make_synthetic_recording(spec).recording, cfg.filter);
  return {id, cue_epochs(rec, cfg.window_offset_s, cfg.window_length_s, {})};
}

// The offline stand-in cohort: n subjects with per-subject seeds derived
// from `seed`. erd_depth 0.6 gives realistic overlap; ~0.95 is separable.
inline std::vector<SubjectData> synthetic_cohort(size_t n_subjects, uint64_t seed, double erd_depth = 0.6,
                                                 const EvalConfig& cfg = {}) {
  std::vector<SubjectData> out;
  for (size_t i = 0; i < n_subjects; ++i) {
    SyntheticSpec spec;
    spec.erd_depth = erd_depth;
    spec.seed = seed * 7919 + i + 1;
    char id[32];
    std::snprintf(id, sizeof id, "SYN%02zu", i + 1);
    out.push_back(synthetic_subject(id, spec, cfg));
  }
  return out;
}

// PhysioNet eegmmidb layout: <dir>/S001/S001R04.edf (or <dir>/S001R04.edf),
// imagery runs 4, 8 and 12.
inline SubjectData load_physionet_subject(const std::filesystem::path& dir, int subject, const EvalConfig& cfg = {}) {
  char sid[16];
  std::snprintf(sid, sizeof sid, "S%03d", subject);
  SubjectData out{sid, {}};
  for (const int run : {4, 8, 12}) {
    char name[32];
    std::snprintf(name, sizeof name, "%sR%02d.edf", sid, run);
    auto path = dir / sid / name;
    if (!std::filesystem::exists(path)) path = dir / name;
    if (!std::filesystem::exists(path)) throw Error(ErrorCode::IoFailure, "missing " + path.string());
    const auto rec = bandpass(read_edf(path.string()), cfg.filter);
    auto trials = cue_epochs(rec, cfg.window_offset_s, cfg.window_length_s, {});
    out.trials.insert(out.trials.end(), std::make_move_iterator(trials.begin()), std::make_move_iterator(trials.end()));
  }
  return out;
}

// Per-class centring keeps class separation out of the spread measure.
inline std::vector<FeatureVector> class_centred(std::span<const FeatureVector> fv, std::span<const TrialLabel> labels) {
  std::vector<FeatureVector> out(fv.begin(), fv.end());
  for (const auto cls : {TrialLabel::Left, TrialLabel::Right}) {
    double m0 = 0, m1 = 0;
    size_t n = 0;
    for (size_t i = 0; i < fv.size(); ++i)
      if (labels[i] == cls) { m0 += fv[i].l_idx; m1 += fv[i].delta_hfd; ++n; }
    if (n == 0) continue;
    for (size_t i = 0; i < fv.size(); ++i)
      if (labels[i] == cls) { out[i].l_idx -= m0 / static_cast<double>(n); out[i].delta_hfd -= m1 / static_cast<double>(n); }
  }
  return out;
}

// Runs both pipelines on every subject. The variance-reduction row compares
// all trials (condition a) against those that passed the safety gate and
// received directional feedback (condition b), features centred per subject
// and class.
inline EvalResult evaluate(std::span<const SubjectData> subjects, int k_folds, uint64_t seed, const EvalConfig& cfg = {},
                           std::optional<double> responsive_threshold = std::nullopt) {
  EvalResult out;
  out.folds = k_folds;
  out.seed = seed;
  out.responsive_threshold = responsive_threshold;
  std::vector<std::pair<double, double>> paired;
  std::vector<FeatureVector> all_trials, gated_trials;
  for (const auto& s : subjects) {
    const auto base = crossval(s.trials, k_folds, Pipeline::Baseline, seed, cfg);
    const auto omni = crossval(s.trials, k_folds, Pipeline::OmniNeuro, seed, cfg);
    out.subjects.push_back({s.id, s.trials.size(), base.accuracy, omni.accuracy, binomial_chance_upper(s.trials.size())});
    paired.emplace_back(base.accuracy, omni.accuracy);

    std::vector<FeatureVector> fv;
    std::vector<TrialLabel> labels;
    for (const auto& t : s.trials) {
      fv.push_back(extract_features(t, cfg.engines).vector);
      labels.push_back(*t.label);
    }
    const auto centred = class_centred(fv, labels);
    for (size_t i = 0; i < centred.size(); ++i) {
      all_trials.push_back(centred[i]);
      if (omni.predicted[i] != DecisionClass::Neutral) gated_trials.push_back(centred[i]);
    }
  }
  if (!out.subjects.empty()) {
    for (const auto& s : out.subjects) {
      out.mean_baseline += s.baseline;
      out.mean_omnineuro += s.omnineuro;
    }
    out.mean_baseline /= static_cast<double>(out.subjects.size());
    out.mean_omnineuro /= static_cast<double>(out.subjects.size());
  }
  try {
    out.wilcoxon_p = wilcoxon_signed_rank(paired);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::TooFewPairs) throw;
  }
  try {
    out.variance_reduction = variance_reduction(all_trials, gated_trials);
  } catch (const Error&) {
  }
  if (responsive_threshold) {
    double b = 0, o = 0;
    size_t n = 0;
    for (const auto& s : out.subjects)
      if (s.baseline >= *responsive_threshold) { b += s.baseline; o += s.omnineuro; ++n; }
    if (n > 0) {
      out.responsive_baseline = b / static_cast<double>(n);
      out.responsive_omnineuro = o / static_cast<double>(n);
    }
  }
  return out;
}

inline nlohmann::json to_json(const EvalResult& r) {
  using nlohmann::json;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json subjects = json::array();
  for (const auto& s : r.subjects)
    subjects.push_back({{"id", s.id}, {"n_trials", s.n_trials}, {"baseline", s.baseline},
                        {"omnineuro", s.omnineuro}, {"chance_upper", s.chance_upper}});
  json rows = json::array();
  rows.push_back({{"metric", "baseline"}, {"label", "CSP + LDA mean accuracy"}, {"value", r.mean_baseline}});
  rows.push_back({{"metric", "omnineuro"}, {"label", "OmniNeuro mean accuracy"}, {"value", r.mean_omnineuro}});
  rows.push_back({{"metric", "improvement"}, {"label", "Improvement"}, {"value", r.mean_omnineuro - r.mean_baseline}});
  if (r.responsive_threshold) {
    rows.push_back({{"metric", "responsive_baseline"}, {"label", "CSP + LDA mean accuracy (responsive)"},
                    {"value", opt(r.responsive_baseline)}});
    rows.push_back({{"metric", "responsive_omnineuro"}, {"label", "OmniNeuro mean accuracy (responsive)"},
                    {"value", opt(r.responsive_omnineuro)}});
  }
  rows.push_back({{"metric", "wilcoxon"}, {"label", "Wilcoxon signed-rank p"}, {"value", opt(r.wilcoxon_p)}});
  rows.push_back({{"metric", "variance_reduction"}, {"label", "Inter-trial feature variance reduction"},
                  {"value", opt(r.variance_reduction)}});
  return {{"folds", r.folds},
          {"seed", r.seed},
          {"responsive_threshold", opt(r.responsive_threshold)},
          {"subjects", subjects},
          {"rows", rows}};
}

inline std::string format_percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
  return buf;
}

inline std::string format_signed_percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.2f%%", 100.0 * v);
  return buf;
}

inline std::string render_table(const EvalResult& r) {
  auto pct = [](double v) { return format_percent(v); };
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-34s %12s %12s %12s\n", "Metric", "CSP + LDA", "OmniNeuro", "Improvement");
  out += line;
  out += std::string(73, '-') + "\n";
  std::snprintf(line, sizeof line, "%-34s %12s %12s %12s\n", "Mean Acc. (All Subjects)", pct(r.mean_baseline).c_str(),
                pct(r.mean_omnineuro).c_str(), format_signed_percent(r.mean_omnineuro - r.mean_baseline).c_str());
  out += line;
  if (r.responsive_threshold && r.responsive_baseline) {
    std::snprintf(line, sizeof line, "%-34s %12s %12s %12s\n", "Mean Acc. (Responsive)",
                  pct(*r.responsive_baseline).c_str(), pct(*r.responsive_omnineuro).c_str(),
                  format_signed_percent(*r.responsive_omnineuro - *r.responsive_baseline).c_str());
    out += line;
  }
  out += std::string(73, '-') + "\n";
  if (r.wilcoxon_p)
    std::snprintf(line, sizeof line, "%-34s p = %.4f (Wilcoxon Signed-Rank Test)\n", "Statistical Significance", *r.wilcoxon_p);
  else
    std::snprintf(line, sizeof line, "%-34s n/a (Wilcoxon Signed-Rank Test, fewer than 5 non-zero pairs)\n", "Statistical Significance");
  out += line;
  if (r.variance_reduction)
    std::snprintf(line, sizeof line, "%-34s %+.2f%%\n", "Feature variance reduction", 100.0 * *r.variance_reduction);
  else
    std::snprintf(line, sizeof line, "%-34s n/a\n", "Feature variance reduction");
  out += line;
  out += "\nPer subject:\n";
  for (const auto& s : r.subjects) {
    std::snprintf(line, sizeof line, "  %-8s n=%-4zu baseline %7s  omnineuro %7s  chance<%7s\n", s.id.c_str(), s.n_trials,
                  pct(s.baseline).c_str(), pct(s.omnineuro).c_str(), pct(s.chance_upper).c_str());
    out += line;
  }
  return out;
}

}  // namespace omnineuro
