#pragma once

// Artifact veto: a one-hidden-layer tanh autoencoder over per-channel summary
// statistics. Frames the model reconstructs badly are rejected.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "omnineuro/error.hpp"
#include "omnineuro/physics_engine.hpp"
#include "omnineuro/signal_io.hpp"

namespace omnineuro {

using FeatureRow = std::vector<double>;

// Per channel: [variance, peak-to-peak, line length], before normalisation.
inline FeatureRow raw_window_features(const EpochWindow& window) {
  FeatureRow out;
  out.reserve(3 * window.n_channels());
  for (const auto& row : window.data) {
    double ptp = 0.0, line = 0.0;
    if (!row.empty()) {
      const auto [lo, hi] = std::minmax_element(row.begin(), row.end());
      ptp = *hi - *lo;
    }
    for (size_t i = 1; i < row.size(); ++i) line += std::abs(row[i] - row[i - 1]);
    out.push_back(population_variance(row));
    out.push_back(ptp);
    out.push_back(line);
  }
  return out;
}

// z-scoring with calibration statistics.
struct FeatureScaler {
  std::vector<double> mean;
  std::vector<double> scale;

  static FeatureScaler fit(std::span<const FeatureRow> rows) {
    if (rows.empty()) throw Error(ErrorCode::EmptyInput, "no rows to fit a scaler");
    const size_t d = rows.front().size();
    FeatureScaler s{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
    for (const auto& r : rows)
      for (size_t j = 0; j < d; ++j) s.mean[j] += r[j];
    for (auto& m : s.mean) m /= static_cast<double>(rows.size());
    for (const auto& r : rows)
      for (size_t j = 0; j < d; ++j) s.scale[j] += (r[j] - s.mean[j]) * (r[j] - s.mean[j]);
    for (auto& v : s.scale) v = std::max(std::sqrt(v / static_cast<double>(rows.size())), 1e-12);
    return s;
  }

  FeatureRow apply(const FeatureRow& raw) const {
    if (raw.size() != mean.size()) throw Error(ErrorCode::InvalidArgument, "feature width differs from scaler");
    FeatureRow out(raw.size());
    for (size_t j = 0; j < raw.size(); ++j) out[j] = (raw[j] - mean[j]) / scale[j];
    return out;
  }

  bool operator==(const FeatureScaler&) const = default;
};

inline FeatureRow featurize_window(const EpochWindow& window, const FeatureScaler& scaler) {
  return scaler.apply(raw_window_features(window));
}

struct Autoencoder {
  Eigen::MatrixXd w_enc;  // d_in x d_hidden
  Eigen::VectorXd b_enc;  // d_hidden
  Eigen::MatrixXd w_dec;  // d_hidden x d_in
  Eigen::VectorXd b_dec;  // d_in

  Eigen::Index d_in() const { return w_enc.rows(); }
  Eigen::Index d_hidden() const { return w_enc.cols(); }

  Eigen::VectorXd reconstruct(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd h = (w_enc.transpose() * x + b_enc).array().tanh().matrix();
    return w_dec.transpose() * h + b_dec;
  }

  bool operator==(const Autoencoder& o) const {
    return w_enc == o.w_enc && b_enc == o.b_enc && w_dec == o.w_dec && b_dec == o.b_dec;
  }
};

inline Eigen::Index default_hidden_width(Eigen::Index d_in) { return std::max<Eigen::Index>(2, d_in / 4); }

// Weights uniform(-0.1, 0.1) from a 53-bit draw of mt19937_64; biases zero.
inline Autoencoder init_autoencoder(Eigen::Index d_in, Eigen::Index d_hidden, uint64_t seed) {
  if (d_hidden < 1 || d_hidden >= d_in) throw Error(ErrorCode::InvalidArgument, "need 0 < d_hidden < d_in");
  std::mt19937_64 rng(seed);
  auto draw = [&rng] { return (static_cast<double>(rng() >> 11) * 0x1.0p-53) * 0.2 - 0.1; };
  Autoencoder ae;
  ae.w_enc.resize(d_in, d_hidden);
  ae.w_dec.resize(d_hidden, d_in);
  for (Eigen::Index i = 0; i < d_in; ++i)
    for (Eigen::Index j = 0; j < d_hidden; ++j) ae.w_enc(i, j) = draw();
  for (Eigen::Index j = 0; j < d_hidden; ++j)
    for (Eigen::Index i = 0; i < d_in; ++i) ae.w_dec(j, i) = draw();
  ae.b_enc = Eigen::VectorXd::Zero(d_hidden);
  ae.b_dec = Eigen::VectorXd::Zero(d_in);
  return ae;
}

inline Eigen::VectorXd to_eigen(const FeatureRow& row) {
  return Eigen::Map<const Eigen::VectorXd>(row.data(), static_cast<Eigen::Index>(row.size()));
}

// Columns are samples.
inline Eigen::MatrixXd to_matrix(std::span<const FeatureRow> rows) {
  if (rows.empty()) return {};
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.front().size()), static_cast<Eigen::Index>(rows.size()));
  for (size_t c = 0; c < rows.size(); ++c) {
    if (rows[c].size() != rows.front().size()) throw Error(ErrorCode::InvalidArgument, "ragged feature rows");
    x.col(static_cast<Eigen::Index>(c)) = to_eigen(rows[c]);
  }
  return x;
}

// Per-vector mean squared reconstruction error.
inline double reconstruction_error(const Autoencoder& ae, const FeatureRow& features) {
  const auto x = to_eigen(features);
  return (ae.reconstruct(x) - x).squaredNorm() / static_cast<double>(x.size());
}

struct AutoencoderGradient {
  Eigen::MatrixXd w_enc;
  Eigen::VectorXd b_enc;
  Eigen::MatrixXd w_dec;
  Eigen::VectorXd b_dec;
};

// Loss = mean over samples of per-vector MSE, with its analytic gradient.
inline double loss_and_gradient(const Autoencoder& ae, const Eigen::MatrixXd& x, AutoencoderGradient* grad) {
  const auto d = static_cast<double>(x.rows());
  const auto n = static_cast<double>(x.cols());
  const Eigen::MatrixXd hidden = ((ae.w_enc.transpose() * x).colwise() + ae.b_enc).array().tanh().matrix();
  const Eigen::MatrixXd residual = ((ae.w_dec.transpose() * hidden).colwise() + ae.b_dec) - x;
  const double loss = residual.squaredNorm() / (d * n);
  if (grad) {
    const Eigen::MatrixXd d_out = residual * (2.0 / (d * n));
    grad->w_dec = hidden * d_out.transpose();
    grad->b_dec = d_out.rowwise().sum();
    const Eigen::MatrixXd d_pre = ((ae.w_dec * d_out).array() * (1.0 - hidden.array().square())).matrix();
    grad->w_enc = x * d_pre.transpose();
    grad->b_enc = d_pre.rowwise().sum();
  }
  return loss;
}

inline double dataset_loss(const Autoencoder& ae, std::span<const FeatureRow> rows) {
  return loss_and_gradient(ae, to_matrix(rows), nullptr);
}

struct TrainOptions {
  Eigen::Index d_hidden = 0;  // 0 selects max(2, d_in/4)
  int epochs = 300;
  double learning_rate = 0.05;
  uint64_t seed = 7;
};

struct TrainResult {
  Autoencoder model;
  std::vector<double> loss_history;  // loss before each epoch, then the final loss
};

// Full-batch gradient descent. The returned model is the lowest-loss iterate,
// so the final loss never exceeds the initial one.
inline TrainResult train_with_history(std::span<const FeatureRow> features, const TrainOptions& opts) {
  if (features.size() < 10) throw Error(ErrorCode::InsufficientData, "autoencoder needs at least 10 feature vectors");
  const Eigen::MatrixXd x = to_matrix(features);
  const Eigen::Index hidden = opts.d_hidden > 0 ? opts.d_hidden : default_hidden_width(x.rows());
  if (hidden >= x.rows()) throw Error(ErrorCode::InvalidArgument, "d_hidden must be smaller than d_in");

  TrainResult result{init_autoencoder(x.rows(), hidden, opts.seed), {}};
  Autoencoder current = result.model;
  AutoencoderGradient g;
  double best = loss_and_gradient(current, x, &g);
  result.loss_history.push_back(best);
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    current.w_enc -= opts.learning_rate * g.w_enc;
    current.b_enc -= opts.learning_rate * g.b_enc;
    current.w_dec -= opts.learning_rate * g.w_dec;
    current.b_dec -= opts.learning_rate * g.b_dec;
    const double loss = loss_and_gradient(current, x, &g);
    result.loss_history.push_back(loss);
    if (loss <= best) {
      best = loss;
      result.model = current;
    }
  }
  return result;
}

inline Autoencoder train(std::span<const FeatureRow> features, const TrainOptions& opts) {
  return train_with_history(features, opts).model;
}

struct VetoResult {
  double reconstruction_error = 0.0;
  double threshold = 1.0;
  bool rejected = false;

  bool operator==(const VetoResult&) const = default;
};

inline VetoResult veto(const Autoencoder& ae, const FeatureRow& features, double threshold) {
  if (!(threshold > 0.0)) throw Error(ErrorCode::InvalidArgument, "veto threshold must be positive");
  const double err = reconstruction_error(ae, features);
  return {err, threshold, err > threshold};
}

// Nearest-rank percentile: the ceil(pct/100 * n)-th order statistic.
inline double nearest_rank_percentile(std::vector<double> values, int percent) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "percentile of an empty list");
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  const size_t rank = std::max<size_t>(1, (static_cast<size_t>(percent) * n + 99) / 100);
  return values[std::min(rank, n) - 1];
}

// p95 of reconstruction errors. A zero result (perfect reconstruction) is
// lifted to the smallest positive double so the threshold stays valid.
inline double calibrate_threshold(const Autoencoder& ae, std::span<const FeatureRow> features) {
  if (features.empty()) throw Error(ErrorCode::EmptyInput, "no calibration vectors");
  std::vector<double> errors;
  errors.reserve(features.size());
  for (const auto& f : features) errors.push_back(reconstruction_error(ae, f));
  return std::max(nearest_rank_percentile(std::move(errors), 95), std::numeric_limits<double>::min());
}

}  // namespace omnineuro
