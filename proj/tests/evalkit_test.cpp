// Copyright 2026 The ascnet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "ascnet/errors.hpp"
#include "ascnet/evalkit.hpp"
#include "gtest/gtest.h"

namespace ascnet {
namespace {

ManifestRow make_row(std::size_t cls, const std::string& city, std::size_t loc, std::size_t seg) {
  ManifestRow r;
  r.scene = std::string(kSceneLabels[cls]);
  r.label = cls;
  r.city = city;
  r.location = std::to_string(loc);
  r.segment = std::to_string(seg);
  r.device = "a";
  r.filename = r.scene + "-" + city + "-" + r.location + "-" + r.segment + "-a.wav";
  return r;
}

TEST(MakeFolds, BalancedGridGivesOneLocationPerClassPerFold) {
  std::vector<ManifestRow> rows;
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t l = 0; l < 4; ++l)
      for (std::size_t s = 0; s < 5; ++s) rows.push_back(make_row(c, "lyon", l, s));
  const auto plan = make_folds(rows, 4, 0);
  const auto counts = fold_class_counts(plan, rows);
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t f = 0; f < 4; ++f) EXPECT_EQ(counts[c][f], 5u) << c << " " << f;
}

// Forty locations over ten classes; location sizes vary by at most 5% within
// a manifest so a location-grouped plan can meet the 10% bound.
std::vector<ManifestRow> random_manifest(std::mt19937_64& gen) {
  std::vector<ManifestRow> rows;
  const std::size_t base = 20 + gen() % 40;
  const std::size_t spread = std::max<std::size_t>(1, base / 20);
  const char* cities[] = {"barcelona", "helsinki", "lisbon", "paris"};
  for (std::size_t c = 0; c < 10; ++c)
    for (std::size_t l = 0; l < 4; ++l) {
      const std::size_t n = base + gen() % (spread + 1);
      const std::string city = cities[gen() % 4];
      const std::size_t loc = 100 * c + l;
      for (std::size_t s = 0; s < n; ++s) rows.push_back(make_row(c, city, loc, s));
    }
  std::shuffle(rows.begin(), rows.end(), gen);
  return rows;
}

TEST(MakeFolds, RandomManifestsAreBalancedAndGrouped) {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto rows = random_manifest(gen);
    const auto plan = make_folds(rows, 4, static_cast<std::uint64_t>(trial));
    std::map<std::string, std::size_t> seen;
    for (const auto& r : rows) {
      const auto [it, fresh] = seen.emplace(r.location_id(), plan.fold_of(r));
      ASSERT_EQ(it->second, plan.fold_of(r)) << "location split across folds";
    }
    for (const auto& counts : fold_class_counts(plan, rows)) {
      const auto [mn, mx] = std::minmax_element(counts.begin(), counts.end());
      ASSERT_GT(*mn, 0u);
      EXPECT_LE(static_cast<double>(*mx - *mn) / static_cast<double>(*mx), 0.10);
    }
  }
}

TEST(MakeFolds, DeterministicAndRowOrderInvariant) {
  std::mt19937_64 gen(4);
  auto rows = random_manifest(gen);
  const auto a = make_folds(rows, 4, 9);
  std::shuffle(rows.begin(), rows.end(), gen);
  const auto b = make_folds(rows, 4, 9);
  EXPECT_EQ(a.location_fold, b.location_fold);
  EXPECT_EQ(format_fold_plan(a), format_fold_plan(b));
}

TEST(MakeFolds, TooFewLocationsIsConfigError) {
  std::vector<ManifestRow> rows;
  for (std::size_t l = 0; l < 3; ++l) rows.push_back(make_row(2, "lyon", l, 0));
  EXPECT_THROW(make_folds(rows, 4, 0), ConfigError);
}

TEST(FoldPlanFile, RoundTripAndErrors) {
  std::mt19937_64 gen(5);
  const auto plan = make_folds(random_manifest(gen), 4, 1);
  const auto back = parse_fold_plan(format_fold_plan(plan));
  EXPECT_EQ(back.k, 4u);
  EXPECT_EQ(back.location_fold, plan.location_fold);
  EXPECT_THROW(parse_fold_plan("bus-lyon-1\t1\n"), FormatError);
  EXPECT_THROW(parse_fold_plan("#folds\t4\nbus-lyon-1\t5\n"), FormatError);
  EXPECT_THROW(parse_fold_plan("#folds\t4\nbus-lyon-1 1\n"), FormatError);
  EXPECT_THROW(parse_fold_plan("#folds\t4\nx\t1\nx\t2\n"), FormatError);
  ManifestRow unknown = make_row(0, "nowhere", 1, 1);
  EXPECT_THROW(plan.fold_of(unknown), InputError);
}

TEST(Evaluate, AllCorrect) {
  ScoreMatrix s;
  std::map<std::string, std::size_t> truth;
  for (std::size_t i = 0; i < 30; ++i) {
    std::vector<double> r(10, 0.0);
    r[i % 10] = 1.0;
    s.append("s" + std::to_string(i), r);
    truth["s" + std::to_string(i)] = i % 10;
  }
  const auto rep = evaluate(s, truth);
  for (double a : rep.per_class_accuracy) EXPECT_EQ(a, 100.0);
  EXPECT_EQ(rep.average, 100.0);
  EXPECT_EQ(rep.raw_accuracy, 100.0);
}

TEST(Evaluate, SingleClassHalfCorrect) {
  const std::vector<std::size_t> truth = {3, 3, 3, 3}, pred = {3, 1, 3, 0};
  const auto rep = evaluate_predictions(pred, truth);
  EXPECT_EQ(rep.per_class_accuracy[3], 50.0);
  EXPECT_EQ(rep.average, 50.0);
  EXPECT_TRUE(std::isnan(rep.per_class_accuracy[0]));
}

TEST(Evaluate, ConfusionInvariants) {
  std::mt19937_64 gen(6);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + gen() % 200;
    std::vector<std::size_t> truth(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = gen() % 10;
      pred[i] = gen() % 3 == 0 ? truth[i] : gen() % 10;
    }
    const auto rep = evaluate_predictions(pred, truth);
    std::size_t trace = 0, total = 0;
    for (std::size_t t = 0; t < 10; ++t) {
      std::size_t row = 0;
      for (std::size_t p = 0; p < 10; ++p) row += rep.confusion[t][p];
      EXPECT_EQ(row, rep.per_class_total[t]);
      trace += rep.confusion[t][t];
      total += row;
    }
    EXPECT_EQ(total, n);
    EXPECT_NEAR(100.0 * static_cast<double>(trace) / static_cast<double>(n), rep.raw_accuracy, 1e-12);
  }
}

TEST(Evaluate, UnknownLabels) {
  EXPECT_THROW(evaluate_predictions(std::vector<std::size_t>{1}, std::vector<std::size_t>{10}), InputError);
  ScoreMatrix s;
  s.append("x", std::vector<double>(10, 0.0));
  EXPECT_THROW(evaluate(s, {{"y", 1}}), InputError);
}

TEST(Report, PublishedPerSceneAveraging) {
  const std::vector<double> ours = {71.5, 92.7, 74.3, 75.2, 92.9, 58.6, 71.8, 60.0, 90.6, 81.9};
  const std::vector<double> baseline = {48.4, 62.3, 65.1, 54.5, 83.1, 40.7, 59.4, 60.9, 86.7, 64.0};
  EXPECT_NEAR(average_accuracy(ours), 77.0, 0.05);
  EXPECT_NEAR(average_accuracy(baseline), 62.5, 0.05);
  const std::vector<ReportColumn> cols = {{"Our system", ours}, {"Baseline", baseline}};
  const auto text = format_report(cols);
  EXPECT_NE(text.find("Metro Station"), std::string::npos);
  EXPECT_NE(text.find("Street Pedestrian"), std::string::npos);
  const auto avg = text.substr(text.find("Average"));
  EXPECT_NE(avg.find("77.0"), std::string::npos) << text;
  EXPECT_NE(avg.find("62.5"), std::string::npos) << text;
}

TEST(Report, SceneTitles) {
  EXPECT_EQ(scene_title("metro_station"), "Metro Station");
  EXPECT_EQ(scene_title("bus"), "Bus");
}

}  // namespace
}  // namespace ascnet
