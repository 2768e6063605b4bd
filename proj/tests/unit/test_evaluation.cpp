#include <gtest/gtest.h>

#include <cmath>

#include "diffden/error.hpp"
#include "diffden/evaluation.hpp"
#include "diffden/rng.hpp"

namespace dd = diffden;

TEST(Metrics, WorkedExamples) {
  EXPECT_NEAR(dd::f1_score({8, 2, 0, 4}), 0.7272727272727273, 1e-15);
  EXPECT_NEAR(dd::mcc({6, 2, 5, 3}), 0.3779644730092272, 1e-15);
}

// Brute force straight from the definitions via label vectors.
TEST(Metrics, AgreeWithBruteForceOnRandomMatrices) {
  dd::Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    dd::ConfusionMatrix cm{rng.next_u64() % 40, rng.next_u64() % 40, rng.next_u64() % 40, rng.next_u64() % 40};
    std::vector<int> y, p;
    auto push = [&](std::uint64_t n, int a, int b) {
      for (std::uint64_t i = 0; i < n; ++i) y.push_back(a), p.push_back(b);
    };
    push(cm.tp, 1, 1);
    push(cm.fp, 0, 1);
    push(cm.tn, 0, 0);
    push(cm.fn, 1, 0);
    if (y.empty()) continue;
    const auto back = dd::confusion_from_predictions(y, p);
    EXPECT_EQ(back, cm);
    double tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      tp += y[i] && p[i];
      fp += !y[i] && p[i];
      fn += y[i] && !p[i];
      tn += !y[i] && !p[i];
    }
    if (tp + fp + fn > 0) {
      EXPECT_NEAR(dd::f1_score(cm), 2 * tp / (2 * tp + fp + fn), 1e-12);
    }
    const double den = std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn));
    bool degenerate = false;
    const double m = dd::mcc(cm, &degenerate);
    EXPECT_EQ(degenerate, den == 0.0);
    EXPECT_NEAR(m, den == 0.0 ? 0.0 : (tp * tn - fp * fn) / den, 1e-12);
    EXPECT_LE(std::abs(m), 1.0 + 1e-12);
  }
}

TEST(Metrics, UndefinedAndDegenerateCases) {
  EXPECT_THROW(dd::f1_score({0, 0, 5, 0}), dd::Error);
  EXPECT_EQ(dd::f1_score({0, 3, 1, 2}), 0.0);
  bool degenerate = false;
  EXPECT_EQ(dd::mcc({5, 0, 0, 0}, &degenerate), 0.0);
  EXPECT_TRUE(degenerate);
  EXPECT_EQ(dd::mcc({3, 0, 4, 0}), 1.0);
  EXPECT_EQ(dd::mcc({0, 3, 0, 4}), -1.0);
  EXPECT_THROW(dd::confusion_from_predictions(std::vector<int>{1}, std::vector<int>{1, 0}), dd::Error);
}

TEST(DcEvents, ZigzagWorkedExample) {
  const std::vector<double> p{100.0, 102.0, 99.96, 101.9592};
  const auto r = dd::dc_events(p, 0.01);
  EXPECT_EQ(r.event_count, 3u);
  EXPECT_EQ(r.event_indices, (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_EQ(dd::dc_events(p, 0.05).event_count, 0u);
}

TEST(DcEvents, MonotoneAndFlatSeries) {
  std::vector<double> up(50);
  for (std::size_t i = 0; i < 50; ++i) up[i] = 100.0 * std::pow(1.01, static_cast<double>(i));
  EXPECT_EQ(dd::dc_events(up, 0.03).event_count, 1u);  // first confirmed move only
  EXPECT_EQ(dd::dc_events(std::vector<double>(10, 5.0), 0.01).event_count, 0u);
}

TEST(DcEvents, ScaleInvariantAndRejectsBadInput) {
  dd::Rng rng(3);
  std::vector<double> p{100.0};
  for (int i = 0; i < 300; ++i) p.push_back(p.back() * std::exp(0.01 * rng.gaussian()));
  for (double k : {2.0, 0.5, 4.0}) {
    std::vector<double> q(p);
    for (double& v : q) v *= k;
    for (double th : {0.005, 0.01, 0.02})
      EXPECT_EQ(dd::dc_events(q, th).event_indices, dd::dc_events(p, th).event_indices);
  }
  EXPECT_THROW(dd::dc_events(p, 0.0), dd::Error);
  EXPECT_THROW(dd::dc_events(std::vector<double>{1.0}, 0.01), dd::Error);
  EXPECT_THROW(dd::dc_events(std::vector<double>{1.0, -1.0}, 0.01), dd::Error);
}

TEST(DcEvents, RegularZigzagCountsEveryLegBelowItsSize) {
  std::vector<double> p{100.0};
  for (int leg = 0; leg < 12; ++leg) p.push_back(p.back() * (leg % 2 ? 1.0 / 1.05 : 1.05));
  for (double th : {0.01, 0.03, 0.045}) EXPECT_EQ(dd::dc_events(p, th).event_count, 12u) << th;
  EXPECT_EQ(dd::dc_events(p, 0.06).event_count, 0u);
}

TEST(Histogram, CountsAndClosedLastBin) {
  const std::vector<double> v{0.0, 0.25, 0.5, 0.75, 1.0, 1.0};
  const auto h = dd::return_histogram(v, 4);
  ASSERT_EQ(h.edges.size(), 5u);
  EXPECT_EQ(h.counts, (std::vector<std::size_t>{1, 1, 1, 3}));
  std::size_t total = 0;
  for (auto c : h.counts) total += c;
  EXPECT_EQ(total, v.size());
  const auto csv = dd::histogram_csv(h);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "bin_lo,bin_hi,count");
}

TEST(Histogram, LogReturns) {
  const auto r = dd::log_returns(std::vector<double>{100, 110, 99});
  ASSERT_EQ(r.size(), 2u);
  EXPECT_NEAR(r[0], std::log(1.1), 1e-15);
  EXPECT_NEAR(r[1], std::log(0.9), 1e-15);
}
