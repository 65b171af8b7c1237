#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "drivesim/roc.hpp"

using namespace drivesim;

namespace
{
/// Rank statistic: probability a random positive scores strictly lower than a
/// random negative, ties counting half. Equals the trapezoid AUC of the curve.
double pairwise_auc(const std::vector<RocSample> & samples, double gt_threshold)
{
  double wins = 0.0;
  int pairs = 0;
  for (const auto & pos : samples) {
    if (!(pos.ground_truth < gt_threshold)) {
      continue;
    }
    for (const auto & neg : samples) {
      if (neg.ground_truth < gt_threshold) {
        continue;
      }
      ++pairs;
      wins += pos.statistic < neg.statistic ? 1.0 : pos.statistic == neg.statistic ? 0.5 : 0.0;
    }
  }
  return wins / pairs;
}

RocSample sample(double statistic, double truth, std::string id = "s")
{
  return {std::move(id), statistic, truth};
}
}  // namespace

TEST(Roc, PerfectSeparation)
{
  std::vector<RocSample> s{sample(0.1, 0.0), sample(0.2, 0.3), sample(0.9, 0.95), sample(0.8, 1.0)};
  const auto r = roc_curve(s, 0.5);
  EXPECT_DOUBLE_EQ(r.auc, 1.0);
  EXPECT_EQ(r.points.front().threshold, -std::numeric_limits<double>::infinity());
  EXPECT_EQ(r.points.front().true_positive_rate, 0.0);
  EXPECT_EQ(r.points.front().false_positive_rate, 0.0);
  EXPECT_EQ(r.points.back().true_positive_rate, 1.0);
  EXPECT_EQ(r.points.back().false_positive_rate, 1.0);
  EXPECT_EQ(r.points.size(), 5u);
}

TEST(Roc, InvertedPredictionsGiveZero)
{
  std::vector<RocSample> s{sample(0.9, 0.0), sample(0.1, 1.0)};
  EXPECT_DOUBLE_EQ(roc_curve(s, 0.5).auc, 0.0);
}

TEST(Roc, AllTiedGivesHalf)
{
  std::vector<RocSample> s{sample(0.5, 0.0), sample(0.5, 0.0), sample(0.5, 1.0)};
  const auto r = roc_curve(s, 0.5);
  EXPECT_DOUBLE_EQ(r.auc, 0.5);
  EXPECT_EQ(r.points.size(), 2u);
}

TEST(Roc, DegenerateLabelsThrow)
{
  EXPECT_THROW(roc_curve({sample(0.1, 0.0), sample(0.2, 0.1)}, 0.5), std::invalid_argument);
  EXPECT_THROW(roc_curve({sample(0.1, 0.9), sample(0.2, 0.6)}, 0.5), std::invalid_argument);
  EXPECT_THROW(roc_curve({}, 0.5), std::invalid_argument);
}

TEST(Roc, RandomPredictionsNearHalf)
{
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<RocSample> s;
  for (int i = 0; i < 200; ++i) {
    s.push_back(sample(u(rng), u(rng)));
  }
  const auto r = roc_curve(s, 0.5);
  EXPECT_GE(r.auc, 0.4);
  EXPECT_LE(r.auc, 0.6);
}

TEST(Roc, AucMatchesPairwiseStatisticAndCurveIsMonotone)
{
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 60);
    std::vector<RocSample> s;
    for (int i = 0; i < n; ++i) {
      // Coarse values force ties in both the statistic and the label.
      s.push_back(sample(static_cast<double>(rng() % 8) / 8.0, static_cast<double>(rng() % 5) / 4.0));
    }
    s[0].ground_truth = 0.0;
    s[1].ground_truth = 1.0;
    const auto r = roc_curve(s, 0.5);
    EXPECT_NEAR(r.auc, pairwise_auc(s, 0.5), 1e-12);
    EXPECT_NEAR(trapezoid_auc(r.points), r.auc, 1e-12);
    for (std::size_t i = 1; i < r.points.size(); ++i) {
      EXPECT_LT(r.points[i - 1].threshold, r.points[i].threshold);
      EXPECT_LE(r.points[i - 1].true_positive_rate, r.points[i].true_positive_rate);
      EXPECT_LE(r.points[i - 1].false_positive_rate, r.points[i].false_positive_rate);
    }
  }
}

TEST(Roc, AnalysisUsesMinimumPredictedAggregate)
{
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<EpisodeLog> logs(12);
  std::vector<double> expected_min;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    logs[i].scenario.id = "sc" + std::to_string(i);
    logs[i].report.aggregate = i % 2 == 0 ? 0.2 : 0.9;
    double lowest = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 30; ++k) {
      TickRecord t;
      t.tick = k;
      if (k % 7 != 3) {
        t.predicted_aggregate = u(rng);
        lowest = std::min(lowest, *t.predicted_aggregate);
      }
      logs[i].ticks.push_back(t);
    }
    expected_min.push_back(lowest);
  }
  const auto r = roc_analysis(logs, 0.5);
  ASSERT_EQ(r.samples.size(), logs.size());
  for (std::size_t i = 0; i < logs.size(); ++i) {
    EXPECT_EQ(r.samples[i].scenario_id, logs[i].scenario.id);
    EXPECT_EQ(r.samples[i].statistic, expected_min[i]);
    EXPECT_EQ(r.samples[i].ground_truth, logs[i].report.aggregate);
  }
}

TEST(Roc, JsonWritesAnchorAsNull)
{
  const auto r = roc_curve({sample(0.1, 0.0), sample(0.9, 1.0)}, 0.5);
  const auto j = roc_to_json(r);
  EXPECT_TRUE(j["points"][0]["threshold"].is_null());
  EXPECT_DOUBLE_EQ(j["auc"].get<double>(), 1.0);
}
