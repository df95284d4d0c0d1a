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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ascnet/dataset.hpp"
#include "ascnet/fusion.hpp"

namespace ascnet {

// Assignment of recording locations to folds numbered 1..k.
struct FoldPlan {
  std::size_t k = 4;
  std::map<std::string, std::size_t> location_fold;

  // Throws InputError for a location the plan does not know.
  std::size_t fold_of(const ManifestRow& row) const;
};

// Greedy location-grouped stratification: per class, locations are taken
// largest first and each goes to the fold holding the fewest segments of that
// class, ties broken by total fold size and then a seeded fold order. The
// result does not depend on manifest row order. Throws ConfigError when some
// class has fewer locations than folds.
FoldPlan make_folds(std::span<const ManifestRow> rows, std::size_t k = 4, std::uint64_t seed = 0);

// Segments per (class, fold), indexed [class][fold - 1].
std::vector<std::vector<std::size_t>> fold_class_counts(const FoldPlan& plan, std::span<const ManifestRow> rows);

// "location<TAB>fold" lines after a "#folds<TAB>k" header.
std::string format_fold_plan(const FoldPlan& plan);
FoldPlan parse_fold_plan(const std::string& text);
void write_fold_plan(const std::filesystem::path& path, const FoldPlan& plan);
FoldPlan read_fold_plan(const std::filesystem::path& path);

struct EvalReport {
  std::size_t n_classes = 10;
  std::vector<std::size_t> per_class_total;
  std::vector<std::size_t> per_class_correct;
  std::vector<double> per_class_accuracy;  // percent; NaN for absent classes
  double average = 0.0;                     // unweighted mean over present classes, percent
  double raw_accuracy = 0.0;                // correct / total, percent
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
};

// Throws InputError for labels outside [0, n_classes) and AlignmentError on
// length mismatch.
EvalReport evaluate_predictions(std::span<const std::size_t> predicted, std::span<const std::size_t> truth,
                                std::size_t n_classes = kNumClasses);
// Prediction = argmax score. Every segment id must be in `truth`.
EvalReport evaluate(const ScoreMatrix& scores, const std::map<std::string, std::size_t>& truth);

// Mean of per-class accuracies, skipping NaN entries.
double average_accuracy(std::span<const double> per_class);

struct ReportColumn {
  std::string title;
  std::vector<double> per_class;  // percent
};

// Plain-text table with one row per scene, an Average row and one column per
// system, accuracies to one decimal.
std::string format_report(std::span<const ReportColumn> columns);
std::string format_confusion(const EvalReport& r);

// Display name of a scene label: "metro_station" -> "Metro Station".
std::string scene_title(std::string_view label);

}  // namespace ascnet
