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
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace ascnet {

// Per-segment pre-softmax class scores of one system.
struct ScoreMatrix {
  std::string system;
  std::vector<std::string> ids;
  std::size_t n_classes = 10;
  std::vector<double> values;  // ids.size() x n_classes, row-major

  std::size_t rows() const { return ids.size(); }
  double at(std::size_t i, std::size_t k) const { return values[i * n_classes + k]; }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * n_classes, n_classes}; }
  void append(const std::string& id, std::span<const double> scores);
  // Throws DimensionError on size mismatch and NumericError on non-finite entries.
  void validate() const;
};

std::vector<std::size_t> argmax_labels(const ScoreMatrix& s);

// Fused scores are sum_i alpha_i * s_i + beta.
struct CalibrationModel {
  std::vector<std::string> systems;
  std::vector<double> alpha;
  std::vector<double> beta;
};

struct FitOptions {
  double gradient_tolerance = 1e-7;  // on the infinity norm
  int max_iterations = 10000;
  double armijo = 1e-4;
};

struct CalibrationFit {
  CalibrationModel model;
  double initial_nll = 0.0;
  double final_nll = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> nll_trace;  // objective after every accepted step
};

// Mean multiclass cross-entropy of softmax(fused scores).
double calibration_nll(const CalibrationModel& model, std::span<const ScoreMatrix> systems,
                       std::span<const std::size_t> labels);

// Full-batch gradient descent with backtracking from alpha = 1/n, beta = 0.
// Throws AlignmentError when the systems disagree on segment order and
// ConfigError when every label is the same class.
CalibrationFit fit_calibration(std::span<const ScoreMatrix> systems, std::span<const std::size_t> labels,
                               const FitOptions& options = {});

ScoreMatrix apply_calibration(const CalibrationModel& model, std::span<const ScoreMatrix> systems);

// Element-wise mean after aligning every matrix to the first one's id order.
ScoreMatrix average_fold_scores(std::span<const ScoreMatrix> per_fold);

// Most voted class per segment. Ties go to the tied class with the higher
// fused score, then to the lower class index.
std::vector<std::size_t> majority_vote(std::span<const std::vector<std::size_t>> predictions,
                                       const ScoreMatrix& fused);

// Score TSV: "#classes" then the class names on the first line, then one
// line per segment with the id and shortest round-trip decimal scores.
std::string format_scores(const ScoreMatrix& s);
ScoreMatrix parse_scores(const std::string& text, const std::string& system = "");
void write_scores(const std::filesystem::path& path, const ScoreMatrix& s);
ScoreMatrix read_scores(const std::filesystem::path& path);

std::string format_calibration(const CalibrationModel& m);
CalibrationModel parse_calibration(const std::string& text);
void write_calibration(const std::filesystem::path& path, const CalibrationModel& m);
CalibrationModel read_calibration(const std::filesystem::path& path);

}  // namespace ascnet
