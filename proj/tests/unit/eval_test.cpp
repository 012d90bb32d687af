// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#include <gtest/gtest.h>

#include <cmath>

#include "wmattr/error.hpp"
#include "wmattr/eval/metrics.hpp"
#include "wmattr/random.hpp"

namespace wmattr::eval {
namespace {

// Pair counting over every positive-negative pair.
double brute_auroc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] != 1 || y[j] != 0) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

void random_set(Rng& rng, std::vector<double>& s, std::vector<int>& y) {
  const std::size_t n = 2 + rng.below(60);
  s.resize(n);
  y.resize(n);
  const double levels = 2.0 + static_cast<double>(rng.below(10));  // coarse scores produce ties
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = rng.bernoulli(0.5) ? std::floor(rng.uniform() * levels) / levels : rng.uniform();
    y[i] = rng.bernoulli(0.4) ? 1 : 0;
  }
  y[0] = 1;
  y[1] = 0;
}

TEST(Confusion, PerfectScores) {
  const std::vector<double> s{1, 0, 1, 0};
  const std::vector<int> y{1, 0, 1, 0};
  const auto m = confusion_metrics(s, y);
  EXPECT_EQ(m.precision, 1.0);
  EXPECT_EQ(m.recall, 1.0);
  EXPECT_EQ(m.accuracy, 1.0);
}

TEST(Confusion, NothingPredictedPositive) {
  const std::vector<double> s{0.4, 0.4, 0.4};
  const std::vector<int> y{1, 0, 1};
  const auto m = confusion_metrics(s, y);
  EXPECT_EQ(m.recall, 0.0);
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_TRUE(m.precision_undefined);
}

TEST(Confusion, HandCountedTable) {
  const std::vector<double> s{0.9, 0.8, 0.3};
  const std::vector<int> y{1, 0, 0};
  const auto m = confusion_metrics(s, y, 0.5);
  EXPECT_DOUBLE_EQ(m.precision, 0.5);
  EXPECT_DOUBLE_EQ(m.recall, 1.0);
  EXPECT_DOUBLE_EQ(m.accuracy, 2.0 / 3.0);
}

TEST(Confusion, Errors) {
  const std::vector<double> none;
  const std::vector<int> no_labels;
  EXPECT_THROW(confusion_metrics(none, no_labels), DataError);
  const std::vector<double> s{0.2};
  const std::vector<int> y{1};
  EXPECT_THROW(confusion_metrics(s, y, 1.0), ConfigError);
  EXPECT_THROW(confusion_metrics(s, std::vector<int>{1, 0}), DataError);
}

TEST(Auroc, HandExamples) {
  EXPECT_DOUBLE_EQ(*auroc(std::vector<double>{0.9, 0.7, 0.6, 0.2}, std::vector<int>{1, 0, 1, 0}), 0.75);
  EXPECT_DOUBLE_EQ(*auroc(std::vector<double>{0.9, 0.8, 0.1, 0.2}, std::vector<int>{1, 1, 0, 0}), 1.0);
  EXPECT_DOUBLE_EQ(*auroc(std::vector<double>{0.3, 0.3, 0.3}, std::vector<int>{1, 0, 1}), 0.5);
  EXPECT_FALSE(auroc(std::vector<double>{0.3, 0.5}, std::vector<int>{1, 1}).has_value());
}

TEST(Auroc, MatchesPairCountingWithTies) {
  Rng rng(31);
  std::vector<double> s;
  std::vector<int> y;
  for (int trial = 0; trial < 1000; ++trial) {
    random_set(rng, s, y);
    EXPECT_NEAR(*auroc(s, y), brute_auroc(s, y), 1e-12);
  }
}

TEST(Auroc, LabelSwapSymmetryWithoutTies) {
  Rng rng(32);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(40);
    std::vector<double> s(n);
    std::vector<int> y(n), flipped(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = rng.uniform();
      y[i] = rng.bernoulli(0.5);
    }
    y[0] = 1;
    y[1] = 0;
    for (std::size_t i = 0; i < n; ++i) flipped[i] = 1 - y[i];
    EXPECT_NEAR(*auroc(s, y) + *auroc(s, flipped), 1.0, 1e-12);
  }
}

TEST(Ranking, InvariantUnderMonotoneTransform) {
  Rng rng(33);
  std::vector<double> s;
  std::vector<int> y;
  for (int trial = 0; trial < 200; ++trial) {
    random_set(rng, s, y);
    std::vector<double> t(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) t[i] = std::exp(3.0 * s[i]) - 7.0;
    EXPECT_EQ(*auroc(s, y), *auroc(t, y));
    EXPECT_EQ(auprc(s, y), auprc(t, y));
  }
}

TEST(Auprc, HandComputedCases) {
  EXPECT_DOUBLE_EQ(auprc(std::vector<double>{0.9, 0.7, 0.6, 0.2}, std::vector<int>{1, 0, 1, 0}), 5.0 / 6.0);
  EXPECT_DOUBLE_EQ(auprc(std::vector<double>{0.9, 0.8, 0.2}, std::vector<int>{1, 1, 0}), 1.0);
  EXPECT_DOUBLE_EQ(auprc(std::vector<double>{0.9, 0.8, 0.7, 0.6, 0.1}, std::vector<int>{0, 0, 0, 0, 1}), 0.2);
  // Ranks 1 and 5 of 5: (1 + 2/5) / 2.
  EXPECT_DOUBLE_EQ(auprc(std::vector<double>{0.9, 0.8, 0.7, 0.6, 0.1}, std::vector<int>{1, 0, 0, 0, 1}), 0.7);
  // A tied group of one positive and one negative shares precision 1/2.
  EXPECT_DOUBLE_EQ(auprc(std::vector<double>{0.5, 0.5, 0.1}, std::vector<int>{1, 0, 0}), 0.5);
  // Tie at the top, then a positive: (2 * 2/3 + 3/4) / 3.
  EXPECT_DOUBLE_EQ(auprc(std::vector<double>{0.8, 0.8, 0.8, 0.4}, std::vector<int>{1, 1, 0, 1}),
                   (2.0 * 2.0 / 3.0 + 0.75) / 3.0);
  EXPECT_THROW(auprc(std::vector<double>{0.1}, std::vector<int>{0}), DataError);
}

TEST(Auprc, TrapezoidOverestimatesKnownCase) {
  const std::vector<double> s{0.9, 0.7, 0.6, 0.2};
  const std::vector<int> y{1, 0, 1, 0};
  // Points (0,1), (1/2,1), (1,2/3): 1/2 + (1 + 2/3) / 4 = 11/12.
  EXPECT_DOUBLE_EQ(trapezoid_auprc(s, y), 11.0 / 12.0);
  EXPECT_GT(trapezoid_auprc(s, y), auprc(s, y));
}

TEST(Baseline, Prevalence) {
  EXPECT_EQ(baseline_auprc(std::vector<int>{1, 0, 0, 0}), 0.25);
  EXPECT_EQ(baseline_auprc(std::vector<int>{1, 1}), 1.0);
  Rng rng(34);
  std::vector<double> s;
  std::vector<int> y;
  for (int trial = 0; trial < 100; ++trial) {
    random_set(rng, s, y);
    double sum = 0.0;
    for (int v : y) sum += v;
    EXPECT_EQ(baseline_auprc(y), sum / static_cast<double>(y.size()));
  }
}

TEST(Format, HalfAwayFromZero) {
  EXPECT_EQ(format_fixed(0.755, 2), "0.76");
  EXPECT_EQ(format_fixed(0.745, 2), "0.75");
  EXPECT_EQ(format_fixed(0.125, 2), "0.13");
  EXPECT_EQ(format_fixed(-0.125, 2), "-0.13");
  EXPECT_EQ(format_fixed(1.0, 2), "1.00");
  EXPECT_EQ(format_fixed(0.0004, 3), "0.000");
  EXPECT_EQ(format_fixed(-0.0004, 3), "0.000");
  EXPECT_EQ(format_fixed(0.1234, 3), "0.123");
  EXPECT_EQ(format_fixed(NAN, 2), "NA");
  EXPECT_EQ(format_months(13.5), "13.5");
  EXPECT_EQ(format_months(2.0), "2");
}

TEST(Table, ShapeAndMissingValues) {
  MetricsRow row;
  row.task = "attrition";
  row.window = {1, 1.5};
  row.precision = 0.5;
  row.recall = 0.755;
  row.auroc = 0.8;
  row.baseline_auprc = 0.3;
  const std::vector<MetricsRow> one{row};
  EXPECT_EQ(results_table(one, "attrition"),
            "Observation,Prediction,Precision,Recall,AUROC,AUPRC,B.AUPRC\n1,1.5,0.50,0.76,0.80,NA,0.30\n");

  std::vector<MetricsRow> rows;
  for (const auto& w : data::default_window_grid()) {
    for (const char* task : {"attrition", "outcome"}) {
      MetricsRow r = row;
      r.window = w;
      r.task = task;
      rows.push_back(r);
    }
  }
  for (const char* task : {"attrition", "outcome"}) {
    const std::string table = results_table(rows, task, '\t');
    EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 7);
    EXPECT_EQ(std::count(table.begin(), table.end(), '\t'), 7 * 6);
  }
  const auto back = rows_from_json(rows_to_json(rows));
  ASSERT_EQ(back.size(), rows.size());
  EXPECT_EQ(back[3].task, rows[3].task);
  EXPECT_EQ(back[3].window, rows[3].window);
  EXPECT_FALSE(back[3].auprc.has_value());
}

TEST(Evaluate, RowFieldsAndFlags) {
  const std::vector<double> s{0.9, 0.7, 0.6, 0.2};
  const std::vector<int> y{1, 0, 1, 0};
  const MetricsRow r = evaluate_scores(s, y, "attrition", {3, 4.5});
  EXPECT_EQ(r.n, 4u);
  EXPECT_DOUBLE_EQ(*r.auroc, 0.75);
  EXPECT_DOUBLE_EQ(*r.auprc, 5.0 / 6.0);
  EXPECT_EQ(r.baseline_auprc, 0.5);
  EXPECT_TRUE(r.flags.empty());
  const MetricsRow single = evaluate_scores(std::vector<double>{0.2, 0.3}, std::vector<int>{0, 0}, "outcome", {1, 1.5});
  EXPECT_FALSE(single.auroc.has_value());
  EXPECT_FALSE(single.auprc.has_value());
  EXPECT_EQ(single.flags.size(), 2u);
}

}  // namespace
}  // namespace wmattr::eval
