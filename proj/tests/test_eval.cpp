#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <vector>

#include "omnineuro/baseline_eval.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace omnineuro;

namespace {

// Multichannel window of independent noise with per-channel standard deviation.
EpochWindow noise_window(const std::vector<double>& sd, size_t n, uint64_t seed, TrialLabel label) {
  EpochWindow w;
  w.sample_rate_hz = 160.0;
  w.label = label;
  for (size_t c = 0; c < sd.size(); ++c) {
    w.channels.push_back("CH" + std::to_string(c));
    w.data.push_back(fixtures::white_noise(n, seed * 131 + c, sd[c]));
  }
  return w;
}

std::vector<EpochWindow> noise_trials(const std::vector<double>& sd, size_t count, uint64_t seed, TrialLabel label) {
  std::vector<EpochWindow> out;
  for (size_t i = 0; i < count; ++i) out.push_back(noise_window(sd, 320, seed + i, label));
  return out;
}

std::vector<EpochWindow> relabelled(std::vector<EpochWindow> trials, uint64_t seed) {
  std::vector<TrialLabel> labels;
  for (const auto& t : trials) labels.push_back(*t.label);
  std::mt19937_64 rng(seed);
  std::shuffle(labels.begin(), labels.end(), rng);
  for (size_t i = 0; i < trials.size(); ++i) trials[i].label = labels[i];
  return trials;
}

SyntheticSpec small_spec(double erd, uint64_t seed) {
  SyntheticSpec s;
  s.erd_depth = erd;
  s.seed = seed;
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// CSP

TEST(Csp, TopFilterPicksTheHighVarianceChannel) {
  const auto a = noise_trials({3.0, 1.0, 1.0, 1.0}, 20, 1, TrialLabel::Left);
  const auto b = noise_trials({1.0, 1.0, 1.0, 1.0}, 20, 500, TrialLabel::Right);
  const auto m = csp_fit(a, b, 2);
  ASSERT_EQ(m.filters.rows(), 2);
  Eigen::Index arg = 0;
  m.filters.row(0).cwiseAbs().maxCoeff(&arg);
  EXPECT_EQ(arg, 0);
  // trace-normalised covariances: 0.75 / (0.75 + 0.25)
  EXPECT_NEAR(m.selected(0), 0.75, 0.05);
  for (Eigen::Index i = 0; i < m.eigenvalues.size(); ++i) {
    EXPECT_GE(m.eigenvalues(i), 0.0);
    EXPECT_LE(m.eigenvalues(i), 1.0);
  }
}

TEST(Csp, IdenticalClassesGiveFlatSpectrum) {
  const auto a = noise_trials({1.0, 2.0, 0.5, 1.0}, 40, 1, TrialLabel::Left);
  const auto m = csp_fit(a, a, 4);
  for (Eigen::Index i = 0; i < m.eigenvalues.size(); ++i) EXPECT_NEAR(m.eigenvalues(i), 0.5, 1e-9);
}

TEST(Csp, TwoChannelFiltersAreFullRank) {
  const auto a = noise_trials({2.0, 1.0}, 10, 3, TrialLabel::Left);
  const auto b = noise_trials({1.0, 2.0}, 10, 90, TrialLabel::Right);
  const auto m = csp_fit(a, b, 2);
  EXPECT_GT(std::fabs(m.filters.determinant()), 1e-9);
}

TEST(Csp, InvariantToGlobalScaling) {
  auto a = noise_trials({2.0, 1.0, 1.0}, 12, 3, TrialLabel::Left);
  auto b = noise_trials({1.0, 1.0, 2.0}, 12, 70, TrialLabel::Right);
  const auto m = csp_fit(a, b, 2);
  auto rescale = [](std::vector<EpochWindow> v) {
    for (auto& w : v)
      for (auto& ch : w.data)
        for (auto& x : ch) x *= 37.5;
    return v;
  };
  const auto as = rescale(a), bs = rescale(b);
  const auto ms = csp_fit(as, bs, 2);
  auto order = [](const Eigen::VectorXd& ev) {
    std::vector<Eigen::Index> idx(static_cast<size_t>(ev.size()));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto i, auto j) { return ev(i) < ev(j); });
    return idx;
  };
  EXPECT_EQ(order(m.eigenvalues), order(ms.eigenvalues));
  for (Eigen::Index i = 0; i < m.eigenvalues.size(); ++i) EXPECT_NEAR(m.eigenvalues(i), ms.eigenvalues(i), 1e-9);
  // filters agree up to per-filter sign and scale
  for (Eigen::Index r = 0; r < m.filters.rows(); ++r) {
    const Eigen::VectorXd u = m.filters.row(r).normalized(), v = ms.filters.row(r).normalized();
    EXPECT_NEAR(std::fabs(u.dot(v)), 1.0, 1e-9);
  }
  for (size_t i = 0; i < a.size(); ++i) {
    const auto f = m.features(a[i]), fs = ms.features(as[i]);
    for (size_t j = 0; j < f.size(); ++j) EXPECT_NEAR(f[j], fs[j], 1e-9);
  }
}

TEST(Csp, Errors) {
  const auto a = noise_trials({1.0, 1.0}, 1, 1, TrialLabel::Left);
  const auto b = noise_trials({1.0, 1.0}, 4, 1, TrialLabel::Right);
  try {
    csp_fit(a, b, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientTrials);
  }
  EXPECT_THROW(csp_fit(b, b, 3), Error);
  EXPECT_THROW(csp_fit(b, b, 4), Error);
}

// ---------------------------------------------------------------------------
// LDA

TEST(Lda, SeparatedBlobs) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 0.3);
  std::vector<LabeledRow> rows;
  for (int i = 0; i < 30; ++i) {
    rows.push_back({{-2.0 + g(rng), 1.0 + g(rng)}, TrialLabel::Left});
    rows.push_back({{2.0 + g(rng), 1.0 + g(rng)}, TrialLabel::Right});
  }
  const auto m = lda_fit(rows);
  for (const auto& r : rows) EXPECT_EQ(m.predict(r.x), r.label);
  EXPECT_EQ(m.predict({-0.5, 1.0}), TrialLabel::Left);
  EXPECT_EQ(m.predict({0.5, 1.0}), TrialLabel::Right);
}

TEST(Lda, OneDimensionalBoundaryAtMidpoint) {
  std::vector<LabeledRow> rows;
  for (int i = 0; i < 2; ++i) {
    rows.push_back({{-2.0}, TrialLabel::Left});
    rows.push_back({{0.0}, TrialLabel::Left});
  }
  for (int i = 0; i < 3; ++i) {
    rows.push_back({{0.0}, TrialLabel::Right});
    rows.push_back({{2.0}, TrialLabel::Right});
  }
  const auto m = lda_fit(rows);
  EXPECT_GT(m.weights(0), 0.0);
  EXPECT_NEAR(-m.bias / m.weights(0), 0.0, 1e-6);
  // Exactly on the boundary: the larger class wins.
  EXPECT_EQ(m.predict({0.0}), TrialLabel::Right);
  EXPECT_EQ(m.predict({-1e-3}), TrialLabel::Left);
}

TEST(Lda, TieGoesToLeftWhenLeftIsLarger) {
  std::vector<LabeledRow> rows = {{{-2.0}, TrialLabel::Left}, {{0.0}, TrialLabel::Left},  {{-2.0}, TrialLabel::Left},
                                  {{0.0}, TrialLabel::Left},  {{0.0}, TrialLabel::Right}, {{2.0}, TrialLabel::Right}};
  EXPECT_EQ(lda_fit(rows).predict({0.0}), TrialLabel::Left);
}

TEST(Lda, Errors) {
  std::vector<LabeledRow> one = {{{1.0}, TrialLabel::Left}, {{2.0}, TrialLabel::Left}};
  try {
    lda_fit(one);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingleClassData);
  }
  std::vector<LabeledRow> flat = {{{1.0}, TrialLabel::Left}, {{1.0}, TrialLabel::Right}};
  EXPECT_THROW(lda_fit(flat, 0.1), Error);
}

// ---------------------------------------------------------------------------
// Cross-validation

TEST(Crossval, FoldsPartitionAndStratify) {
  const auto subject = synthetic_subject("S", small_spec(0.6, 3));
  const auto r = crossval(subject.trials, 5, Pipeline::Baseline, 42);
  ASSERT_EQ(r.fold_of_trial.size(), subject.trials.size());
  std::map<std::pair<int, TrialLabel>, int> counts;
  for (size_t i = 0; i < subject.trials.size(); ++i) {
    ASSERT_GE(r.fold_of_trial[i], 0);
    ASSERT_LT(r.fold_of_trial[i], 5);
    counts[{r.fold_of_trial[i], *subject.trials[i].label}]++;
  }
  for (const auto cls : {TrialLabel::Left, TrialLabel::Right}) {
    int lo = 1 << 30, hi = 0;
    for (int f = 0; f < 5; ++f) {
      lo = std::min(lo, counts[{f, cls}]);
      hi = std::max(hi, counts[{f, cls}]);
    }
    EXPECT_LE(hi - lo, 1);
  }
  EXPECT_EQ(r.fold_accuracy.size(), 5u);
}

TEST(Crossval, SeparableSubjectIsPerfectForBaseline) {
  const auto subject = synthetic_subject("S", small_spec(0.95, 11));
  EXPECT_EQ(crossval(subject.trials, 5, Pipeline::Baseline, 42).accuracy, 1.0);
}

TEST(Crossval, ShuffledLabelsStayNearChance) {
  const auto subject = synthetic_subject("S", small_spec(0.95, 11));
  double total = 0.0;
  for (uint64_t s = 0; s < 4; ++s) {
    const auto shuffled = relabelled(subject.trials, 100 + s);
    total += crossval(shuffled, 5, Pipeline::Baseline, 42).accuracy;
  }
  EXPECT_GE(total / 4.0, 0.3);
  EXPECT_LE(total / 4.0, 0.7);
}

TEST(Crossval, DeterministicForSeed) {
  const auto subject = synthetic_subject("S", small_spec(0.6, 4));
  for (const auto p : {Pipeline::Baseline, Pipeline::OmniNeuro}) {
    const auto a = crossval(subject.trials, 5, p, 7), b = crossval(subject.trials, 5, p, 7);
    EXPECT_EQ(a.accuracy, b.accuracy);
    EXPECT_EQ(a.predicted, b.predicted);
    EXPECT_EQ(a.fold_of_trial, b.fold_of_trial);
  }
}

TEST(Crossval, OmniNeuroBeatsChanceOnSeparableSubject) {
  const auto subject = synthetic_subject("S", small_spec(0.95, 11));
  const auto r = crossval(subject.trials, 5, Pipeline::OmniNeuro, 42);
  EXPECT_GE(r.accuracy, binomial_chance_upper(subject.trials.size()));
}

TEST(Crossval, Errors) {
  auto subject = synthetic_subject("S", small_spec(0.6, 4));
  EXPECT_THROW(crossval(subject.trials, 1, Pipeline::Baseline, 1), Error);
  std::vector<EpochWindow> few(subject.trials.begin(), subject.trials.begin() + 6);
  try {
    crossval(few, 5, Pipeline::Baseline, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientTrials);
  }
}

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank

TEST(Wilcoxon, AllPositiveSix) {
  std::vector<std::pair<double, double>> paired;
  for (int i = 1; i <= 6; ++i) paired.emplace_back(0.0, double(i));
  EXPECT_DOUBLE_EQ(wilcoxon_signed_rank(paired), 0.03125);
  const auto r = wilcoxon_signed_rank_test(paired);
  EXPECT_EQ(r.w_plus, 21.0);
  EXPECT_TRUE(r.exact);
}

TEST(Wilcoxon, SymmetricAroundSwap) {
  std::vector<std::pair<double, double>> paired = {{1, 2}, {3, 1}, {0, 4}, {2, 2.5}, {5, 1}, {0, 0.1}, {1, 1.7}};
  auto swapped = paired;
  for (auto& [a, b] : swapped) std::swap(a, b);
  EXPECT_DOUBLE_EQ(wilcoxon_signed_rank(paired), wilcoxon_signed_rank(swapped));
}

TEST(Wilcoxon, MatchesEnumerationUpToTen) {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> coarse(-4, 4);
  std::normal_distribution<double> g(0.3, 1.0);
  for (int t = 0; t < 200; ++t) {
    const size_t n = 5 + t % 6;
    std::vector<std::pair<double, double>> paired;
    while (paired.size() < n) {
      // Half the fixtures use integer differences so ties occur.
      const double d = t % 2 ? double(coarse(rng)) : g(rng);
      if (d != 0.0) paired.emplace_back(0.0, d);
    }
    ASSERT_NEAR(wilcoxon_signed_rank(paired), oracles::brute_force_wilcoxon(paired), 1e-12) << t;
  }
}

TEST(Wilcoxon, NormalApproximationAboveTwentyFive) {
  std::vector<std::pair<double, double>> paired;
  for (int i = 1; i <= 30; ++i) paired.emplace_back(0.0, double(i));
  const auto r = wilcoxon_signed_rank_test(paired);
  EXPECT_FALSE(r.exact);
  // z = (465 - 232.5 - 0.5) / sqrt(30*31*61/24)
  const double z = 232.0 / std::sqrt(30.0 * 31.0 * 61.0 / 24.0);
  EXPECT_NEAR(r.p, std::erfc(z / std::sqrt(2.0)), 1e-15);
}

TEST(Wilcoxon, TooFewPairs) {
  const std::vector<std::pair<double, double>> paired = {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {1, 1}, {2, 2}};
  try {
    wilcoxon_signed_rank(paired);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooFewPairs);
  }
}

// ---------------------------------------------------------------------------
// Variance reduction and chance level

TEST(VarianceReduction, HalvedSpreadGivesThreeQuarters) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<FeatureVector> a, b;
  for (int i = 0; i < 50; ++i) {
    const FeatureVector f{g(rng), 0, 0, g(rng)};
    a.push_back(f);
    b.push_back({0.5 * f.l_idx + 3.0, 0, 0, 0.5 * f.delta_hfd - 1.0});
  }
  EXPECT_NEAR(variance_reduction(a, b), 0.75, 1e-12);
  EXPECT_NEAR(variance_reduction(b, a), -3.0, 1e-12);
}

TEST(VarianceReduction, SameDistributionNearZero) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<FeatureVector> a, b;
  for (int i = 0; i < 5000; ++i) {
    a.push_back({g(rng), 0, 0, g(rng)});
    b.push_back({g(rng), 0, 0, g(rng)});
  }
  EXPECT_LT(std::fabs(variance_reduction(a, b)), 0.1);
}

TEST(VarianceReduction, Errors) {
  const std::vector<FeatureVector> flat(5, FeatureVector{1, 0, 0, 2});
  const std::vector<FeatureVector> spread = {{0, 0, 0, 0}, {1, 0, 0, 1}};
  try {
    variance_reduction(flat, spread);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateCondition);
  }
  EXPECT_EQ(variance_reduction(spread, flat), 1.0);
  EXPECT_THROW(variance_reduction(std::vector<FeatureVector>{{1, 0, 0, 1}}, spread), Error);
}

TEST(ClassCentred, RemovesClassMeans) {
  const std::vector<FeatureVector> fv = {{1, 0, 0, 2}, {3, 0, 0, 4}, {10, 0, 0, 0}, {12, 0, 0, 2}};
  const std::vector<TrialLabel> labels = {TrialLabel::Left, TrialLabel::Left, TrialLabel::Right, TrialLabel::Right};
  const auto c = class_centred(fv, labels);
  EXPECT_EQ(c[0].l_idx, -1.0);
  EXPECT_EQ(c[1].delta_hfd, 1.0);
  EXPECT_EQ(c[3].l_idx, 1.0);
}

TEST(Chance, BinomialUpperBound) {
  // n = 10: P(X >= 9) = 11/1024 <= 0.025 < P(X >= 8) = 56/1024.
  EXPECT_DOUBLE_EQ(binomial_chance_upper(10), 0.9);
  // n = 45: P(X >= 30) = 0.0178, P(X >= 29) = 0.0362.
  EXPECT_NEAR(binomial_chance_upper(45), 30.0 / 45.0, 1e-12);
  EXPECT_EQ(binomial_chance_upper(0), 1.0);
  // Discrete quantiles wobble, but stay within one trial of the normal band.
  for (size_t n = 10; n <= 400; n += 10) {
    const double c = binomial_chance_upper(n);
    const double band = 0.5 + 1.96 * 0.5 / std::sqrt(static_cast<double>(n));
    EXPECT_GT(c, 0.5);
    EXPECT_NEAR(c, band, 1.5 / static_cast<double>(n)) << n;
  }
  EXPECT_LT(binomial_chance_upper(400), binomial_chance_upper(100));
  EXPECT_LT(binomial_chance_upper(100), binomial_chance_upper(20));
}

// ---------------------------------------------------------------------------
// Cohort evaluation

TEST(Evaluate, TableAndJsonRows) {
  const auto cohort = synthetic_cohort(3, 1);
  const auto r = evaluate(cohort, 5, 42, {}, 0.5);
  ASSERT_EQ(r.subjects.size(), 3u);
  EXPECT_EQ(r.subjects[0].id, "SYN01");
  EXPECT_FALSE(r.wilcoxon_p.has_value());
  const auto j = to_json(r);
  std::vector<std::string> metrics;
  for (const auto& row : j["rows"]) metrics.push_back(row["metric"]);
  for (const char* m : {"baseline", "omnineuro", "improvement", "wilcoxon", "variance_reduction"})
    EXPECT_NE(std::find(metrics.begin(), metrics.end(), m), metrics.end()) << m;
  const auto table = render_table(r);
  EXPECT_NE(table.find("Mean Acc. (All Subjects)"), std::string::npos);
  EXPECT_NE(table.find("Wilcoxon"), std::string::npos);
  EXPECT_EQ(table, render_table(evaluate(cohort, 5, 42, {}, 0.5)));
}

TEST(Evaluate, FormatPercent) {
  EXPECT_EQ(format_percent(0.8432), "84.32%");
  EXPECT_EQ(format_signed_percent(0.0391), "+3.91%");
  EXPECT_EQ(format_signed_percent(-0.01), "-1.00%");
}
