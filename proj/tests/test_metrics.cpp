// Copyright 2026 The respkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "respkit/metrics.hpp"
#include "support/reported_scores.hpp"

namespace respkit {
namespace {

ConfusionCounts counts_from(std::initializer_list<std::array<long, 4>> rows) {
  ConfusionCounts c;
  int t = 0;
  for (const auto& r : rows) c.counts[t++] = r;
  return c;
}

TEST(Confusion, PerfectAndDegeneratePredictors) {
  const std::vector<int> truth = {0, 1, 2, 3, 0, 2};
  const auto perfect = confusion(truth, truth);
  for (int t = 0; t < 4; ++t) {
    for (int p = 0; p < 4; ++p) EXPECT_EQ(perfect.counts[t][p], t == p ? std::count(truth.begin(), truth.end(), t) : 0);
  }
  const std::vector<int> normal(truth.size(), 0);
  const auto all_normal = confusion(truth, normal);
  for (int t = 0; t < 4; ++t) {
    for (int p = 1; p < 4; ++p) EXPECT_EQ(all_normal.counts[t][p], 0);
  }
  EXPECT_EQ(all_normal.total(), 6);
}

TEST(Confusion, MatchesHandTally) {
  std::mt19937_64 rng(1);
  std::vector<int> truth(100), pred(100);
  for (int i = 0; i < 100; ++i) {
    truth[i] = static_cast<int>(rng() % 4);
    pred[i] = static_cast<int>(rng() % 4);
  }
  const auto c = confusion(truth, pred);
  for (int t = 0; t < 4; ++t) {
    for (int p = 0; p < 4; ++p) {
      long n = 0;
      for (int i = 0; i < 100; ++i) n += truth[i] == t && pred[i] == p;
      EXPECT_EQ(c.counts[t][p], n);
    }
  }
}

TEST(Confusion, Errors) {
  EXPECT_THROW(confusion(std::vector<int>{0, 1}, std::vector<int>{0}), ContractError);
  EXPECT_THROW(confusion(std::vector<int>{4}, std::vector<int>{0}), ContractError);
  EXPECT_THROW(confusion(std::vector<int>{0}, std::vector<int>{-1}), ContractError);
}

TEST(IcbhiScores, ConstructedMatrix) {
  // 10 Normal (8 right); 20 anomalous with 6 exact hits.
  const auto c = counts_from({{8, 1, 1, 0}, {2, 3, 1, 0}, {1, 1, 2, 3}, {0, 4, 2, 1}});
  const auto r = icbhi_scores(c);
  EXPECT_NEAR(r.spec, 80.0, 1e-12);
  EXPECT_NEAR(r.sen, 30.0, 1e-12);
  EXPECT_NEAR(r.icb, 55.0, 1e-12);
  EXPECT_EQ(r.counts, c);
}

TEST(IcbhiScores, PublishedRowsRoundAsPrinted) {
  EXPECT_EQ(one_decimal(icb_from(81.7, 28.4)), "55.1");
  EXPECT_NEAR(icb_from(81.7, 28.4), 55.05, 1e-12);
  EXPECT_EQ(one_decimal(icb_from(82.1, 28.1)), "55.1");
  EXPECT_EQ(one_decimal(0.25), "0.3");
  EXPECT_EQ(one_decimal(57.8), "57.8");
  EXPECT_EQ(one_decimal(100.0), "100.0");
}

// Every published row except three reproduces its ICB from its own Spec and
// Sen; the exceptions are pinned so a change in either direction is noticed.
TEST(IcbhiScores, ReportedRowsAreSelfConsistentExceptKnownThree) {
  int inconsistent = 0;
  for (const auto& r : testing::reported_rows()) {
    const bool ok = testing::reported_gap(r) <= testing::kReportedTolerance;
    EXPECT_EQ(ok, !testing::known_inconsistent(r)) << r.table << " " << r.system;
    inconsistent += ok ? 0 : 1;
  }
  EXPECT_EQ(inconsistent, 3);
  EXPECT_EQ(one_decimal(icb_from(85.6, 30.0)), "57.8");
}

TEST(IcbhiScores, UndefinedWithoutBothPopulations) {
  EXPECT_THROW(icbhi_scores(counts_from({{0, 0, 0, 0}, {1, 1, 0, 0}})), UndefinedMetricError);
  EXPECT_THROW(icbhi_scores(counts_from({{3, 1, 0, 0}})), UndefinedMetricError);
}

TEST(IcbhiScores, Properties) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 20 + static_cast<int>(rng() % 80);
    std::vector<int> truth(n), pred(n);
    for (int i = 0; i < n; ++i) {
      truth[i] = i < 2 ? i : static_cast<int>(rng() % 4);
      pred[i] = static_cast<int>(rng() % 4);
    }
    truth[1] = 1 + static_cast<int>(rng() % 3);
    const auto r = icbhi_scores(confusion(truth, pred));
    EXPECT_NEAR(r.icb, (r.spec + r.sen) / 2, 1e-9);
    // Cycle order is irrelevant.
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> t2(n), p2(n);
    for (int i = 0; i < n; ++i) {
      t2[i] = truth[order[i]];
      p2[i] = pred[order[i]];
    }
    const auto shuffled = icbhi_scores(confusion(t2, p2));
    EXPECT_DOUBLE_EQ(shuffled.spec, r.spec);
    EXPECT_DOUBLE_EQ(shuffled.sen, r.sen);
    // Permuting the anomalous classes consistently keeps sensitivity.
    std::array<int, 4> relabel = {0, 1, 2, 3};
    std::shuffle(relabel.begin() + 1, relabel.end(), rng);
    for (int i = 0; i < n; ++i) {
      t2[i] = relabel[truth[i]];
      p2[i] = relabel[pred[i]];
    }
    EXPECT_DOUBLE_EQ(icbhi_scores(confusion(t2, p2)).sen, r.sen);
  }
}

TEST(Reports, JsonRoundTripAndMarkdown) {
  const auto r = icbhi_scores(counts_from({{8, 1, 1, 0}, {2, 3, 1, 0}, {1, 1, 2, 3}, {0, 4, 2, 1}}));
  const auto j = report_to_json(r);
  EXPECT_EQ(j.at("cycles"), 30);
  const auto back = report_from_json(j);
  EXPECT_EQ(back.counts, r.counts);
  EXPECT_DOUBLE_EQ(back.icb, r.icb);
  EXPECT_THROW(report_from_json({{"spec", 1}}), FormatError);
  const auto md = report_to_markdown(r, "Inc-03");
  EXPECT_EQ(md, "| System | Spec. | Sen. | ICB. |\n|---|---|---|---|\n| Inc-03 | 80.0 | 30.0 | 55.0 |\n");
  MetricsReport perfect = icbhi_scores(counts_from({{5, 0, 0, 0}, {0, 5, 0, 0}}));
  const auto row = report_to_markdown(perfect, "p");
  EXPECT_EQ(row.substr(row.find("| p")), "| p | 100.0 | 100.0 | 100.0 |\n");
}

}  // namespace
}  // namespace respkit
