/*
 * Copyright 2026 The swinsits Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <sstream>

#include "oracles.hpp"
#include "swinsits/error.hpp"
#include "swinsits/metrics.hpp"

using namespace swinsits;

namespace {

const ConfusionMatrix kPair = ConfusionMatrix::from_rows({{40, 10}, {20, 30}});

std::vector<std::vector<double>> as_double(const ConfusionMatrix& cm) {
  std::vector<std::vector<double>> m(cm.num_classes(), std::vector<double>(cm.num_classes()));
  for (std::int64_t i = 0; i < cm.num_classes(); ++i)
    for (std::int64_t j = 0; j < cm.num_classes(); ++j) m[i][j] = static_cast<double>(cm.at(i, j));
  return m;
}

ConfusionMatrix random_matrix(oracle::RefSplitMix& g) {
  const auto k = 2 + static_cast<std::int64_t>(g.next() % 7);
  ConfusionMatrix cm(k);
  const bool skewed = g.next() % 2;
  for (std::int64_t i = 0; i < k; ++i)
    for (std::int64_t j = 0; j < k; ++j) cm.add(i, j, g.next() % (skewed && i == j ? 500 : 60));
  if (cm.total() == 0) cm.add(0, 0);
  return cm;
}

}  // namespace

TEST(Confusion, AccumulateCounts) {
  ConfusionMatrix cm(3);
  const std::vector<std::uint8_t> pred{0, 1, 2, 0, 1, 2}, lab{0, 1, 2, 255, 1, 2};
  accumulate(cm, pred, lab);
  EXPECT_EQ(cm.off_diagonal(), 0u);
  EXPECT_EQ(cm.total(), 5u);
  ConfusionMatrix none(3);
  const std::vector<std::uint8_t> ign(6, 255);
  accumulate(none, pred, ign);
  EXPECT_EQ(none.total(), 0u);
  ConfusionMatrix one(2);
  accumulate(one, std::vector<std::uint8_t>{0, 1, 1, 0}, std::vector<std::uint8_t>{0, 1, 0, 0});
  EXPECT_EQ(one.off_diagonal(), 1u);
  EXPECT_EQ(one.at(0, 1), 1u);
}

TEST(Confusion, PredictionOutOfRange) {
  ConfusionMatrix cm(2);
  try {
    accumulate(cm, std::vector<std::uint8_t>{2}, std::vector<std::uint8_t>{0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Range);
  }
}

TEST(Confusion, AccumulationOrderDoesNotMatter) {
  const std::vector<std::uint8_t> p1{0, 1, 2, 2}, l1{0, 2, 2, 1}, p2{1, 1, 0}, l2{1, 0, 255};
  ConfusionMatrix a(3), b(3);
  accumulate(a, p1, l1);
  accumulate(a, p2, l2);
  accumulate(b, p2, l2);
  accumulate(b, p1, l1);
  EXPECT_EQ(a, b);
  ConfusionMatrix c(3), d(3);
  accumulate(c, p1, l1);
  accumulate(d, p2, l2);
  c.merge(d);
  EXPECT_EQ(c, a);
}

TEST(Accuracy, HandValues) {
  EXPECT_NEAR(overall_accuracy(kPair), 0.70, 1e-12);
  EXPECT_EQ(overall_accuracy(ConfusionMatrix::from_rows({{25, 25}, {25, 25}})), 0.5);
  EXPECT_EQ(overall_accuracy(ConfusionMatrix::from_rows({{3, 0, 0}, {0, 4, 0}, {0, 0, 1}})), 1.0);
  EXPECT_THROW(overall_accuracy(ConfusionMatrix(2)), Error);
}

TEST(Kappa, HandValues) {
  EXPECT_NEAR(cohen_kappa(kPair), 0.4, 1e-12);
  const auto h = oracle::hand_metrics(as_double(kPair));
  EXPECT_NEAR(h.kappa, 0.4, 1e-12);
  EXPECT_NEAR(cohen_kappa(ConfusionMatrix::from_rows({{25, 25}, {25, 25}})), 0.0, 1e-15);
  EXPECT_EQ(cohen_kappa(ConfusionMatrix::from_rows({{3, 0}, {0, 4}})), 1.0);
}

TEST(Kappa, DegenerateChanceAgreement) {
  try {
    cohen_kappa(ConfusionMatrix::from_rows({{9, 0}, {0, 0}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Degenerate);
  }
}

TEST(PerClass, HandValues) {
  const auto m = per_class_prf(kPair);
  EXPECT_NEAR(m[0].precision, 40.0 / 60, 1e-12);
  EXPECT_NEAR(m[0].recall, 0.8, 1e-12);
  EXPECT_NEAR(m[0].f1, 2 * (2.0 / 3) * 0.8 / (2.0 / 3 + 0.8), 1e-12);
  EXPECT_NEAR(m[0].f1, 0.7273, 1e-4);
  EXPECT_NEAR(m[1].precision, 0.75, 1e-12);
  EXPECT_EQ(m[0].support, 50u);
  const auto never = per_class_prf(ConfusionMatrix::from_rows({{5, 0}, {3, 0}}));
  EXPECT_EQ(never[1].precision, 0.0);
  EXPECT_EQ(never[1].f1, 0.0);
  for (const auto& c : per_class_prf(ConfusionMatrix::from_rows({{2, 0}, {0, 7}}))) {
    EXPECT_EQ(c.precision, 1.0);
    EXPECT_EQ(c.recall, 1.0);
    EXPECT_EQ(c.f1, 1.0);
  }
}

TEST(Weighted, HandValues) {
  const auto w = weighted_average(per_class_prf(kPair));
  EXPECT_NEAR(w.precision, (40.0 / 60 + 0.75) / 2, 1e-12);
  EXPECT_NEAR(w.precision, 0.7083, 1e-4);
  std::vector<ClassMetrics> two{{1, 1, 1, 3}, {0, 0, 0, 1}};
  EXPECT_NEAR(weighted_average(two).recall, 0.75, 1e-15);
  std::vector<ClassMetrics> same{{0.3, 0.3, 0.3, 4}, {0.3, 0.3, 0.3, 9}};
  EXPECT_NEAR(weighted_average(same).f1, 0.3, 1e-15);
  std::vector<ClassMetrics> empty{{0.3, 0.3, 0.3, 0}};
  EXPECT_THROW(weighted_average(empty), Error);
}

TEST(Properties, ThousandRandomMatrices) {
  oracle::RefSplitMix g{42};
  int checked = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto cm = random_matrix(g);
    const auto h = oracle::hand_metrics(as_double(cm));
    const double oa = overall_accuracy(cm);
    ASSERT_NEAR(oa, h.oa, 1e-12);
    ASSERT_GE(oa, 0.0);
    ASSERT_LE(oa, 1.0);
    const auto w = weighted_average(per_class_prf(cm));
    ASSERT_NEAR(w.recall, oa, 1e-12);
    double kappa;
    try {
      kappa = cohen_kappa(cm);
    } catch (const Error&) {
      continue;
    }
    ASSERT_NEAR(kappa, h.kappa, 1e-12);
    ASSERT_LE(kappa, oa + 1e-12);
    ++checked;
  }
  EXPECT_GT(checked, 990);
}

TEST(Properties, KappaScaleInvariant) {
  oracle::RefSplitMix g{43};
  for (int i = 0; i < 50; ++i) {
    const auto cm = random_matrix(g);
    ConfusionMatrix scaled(cm.num_classes());
    for (std::int64_t a = 0; a < cm.num_classes(); ++a)
      for (std::int64_t b = 0; b < cm.num_classes(); ++b) scaled.add(a, b, cm.at(a, b) * 7);
    EXPECT_NEAR(cohen_kappa(scaled), cohen_kappa(cm), 1e-12);
  }
}

TEST(Report, RowsAndSummaryLines) {
  const auto cm = ConfusionMatrix::from_rows({{40, 10, 0}, {20, 30, 0}, {0, 0, 0}});
  const auto text = format_report(cm, {"wheat", "maize", "rye"});
  std::istringstream in(text);
  std::string line;
  int class_rows = 0;
  bool weighted = false, oa = false, kappa = false;
  while (std::getline(in, line)) {
    for (const char* n : {"wheat", "maize", "rye"})
      if (line.find(n) != std::string::npos) ++class_rows;
    weighted |= line.find("weighted avg.") != std::string::npos;
    oa |= line.find("Overall Accuracy") != std::string::npos && line.find("70.00") != std::string::npos;
    kappa |= line.find("Kappa") != std::string::npos;
  }
  EXPECT_EQ(class_rows, 3);
  EXPECT_TRUE(weighted);
  EXPECT_TRUE(oa) << text;
  EXPECT_TRUE(kappa) << text;
}
