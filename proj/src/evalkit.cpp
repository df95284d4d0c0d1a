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

#include "ascnet/evalkit.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "ascnet/errors.hpp"
#include "ascnet/rng.hpp"

namespace ascnet {
namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string one_decimal(double v) {
  if (std::isnan(v)) return "--";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

}  // namespace

std::size_t FoldPlan::fold_of(const ManifestRow& row) const {
  const auto it = location_fold.find(row.location_id());
  if (it == location_fold.end())
    throw InputError("fold plan has no entry for location '" + row.location_id() + "' (" + row.filename + ")");
  return it->second;
}

FoldPlan make_folds(std::span<const ManifestRow> rows, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("make_folds: need at least 2 folds");
  std::map<std::string, std::size_t> loc_size;
  std::map<std::string, std::size_t> loc_class;
  for (const auto& r : rows) {
    const auto id = r.location_id();
    ++loc_size[id];
    const auto [it, fresh] = loc_class.emplace(id, r.label);
    if (!fresh && it->second != r.label)
      throw InputError("make_folds: location '" + id + "' holds more than one class");
  }
  std::size_t n_classes = 0;
  for (const auto& [id, c] : loc_class) n_classes = std::max(n_classes, c + 1);
  std::vector<std::vector<std::string>> by_class(n_classes);
  for (const auto& [id, c] : loc_class) by_class[c].push_back(id);
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (!by_class[c].empty() && by_class[c].size() < k) {
      throw ConfigError("make_folds: class '" + std::string(c < kSceneLabels.size() ? kSceneLabels[c] : "?") +
                        "' has " + std::to_string(by_class[c].size()) + " locations, fewer than " +
                        std::to_string(k) + " folds");
    }
  }

  // Seeded fold preference used only to break exact ties.
  std::vector<std::size_t> pref(k);
  std::iota(pref.begin(), pref.end(), 0);
  CounterRng rng(seed, {0xF01D5ull});
  for (std::size_t i = k; i > 1; --i) std::swap(pref[i - 1], pref[rng.below(i)]);

  FoldPlan plan;
  plan.k = k;
  std::vector<std::size_t> fold_total(k, 0);
  for (std::size_t c = 0; c < n_classes; ++c) {
    auto locs = by_class[c];
    std::sort(locs.begin(), locs.end(), [&](const std::string& a, const std::string& b) {
      if (loc_size[a] != loc_size[b]) return loc_size[a] > loc_size[b];
      const auto ha = fnv1a(a) ^ seed, hb = fnv1a(b) ^ seed;
      if (ha != hb) return ha < hb;
      return a < b;
    });
    std::vector<std::size_t> class_count(k, 0);
    for (const auto& id : locs) {
      std::size_t best = pref[0];
      for (std::size_t j = 1; j < k; ++j) {
        const std::size_t f = pref[j];
        if (class_count[f] < class_count[best] ||
            (class_count[f] == class_count[best] && fold_total[f] < fold_total[best]))
          best = f;
      }
      class_count[best] += loc_size[id];
      fold_total[best] += loc_size[id];
      plan.location_fold[id] = best + 1;
    }
  }
  return plan;
}

std::vector<std::vector<std::size_t>> fold_class_counts(const FoldPlan& plan, std::span<const ManifestRow> rows) {
  std::size_t n_classes = kNumClasses;
  for (const auto& r : rows) n_classes = std::max(n_classes, r.label + 1);
  std::vector<std::vector<std::size_t>> counts(n_classes, std::vector<std::size_t>(plan.k, 0));
  for (const auto& r : rows) ++counts[r.label][plan.fold_of(r) - 1];
  return counts;
}

std::string format_fold_plan(const FoldPlan& plan) {
  std::string out = "#folds\t" + std::to_string(plan.k) + "\n";
  for (const auto& [loc, f] : plan.location_fold) out += loc + "\t" + std::to_string(f) + "\n";
  return out;
}

FoldPlan parse_fold_plan(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  FoldPlan plan;
  if (!std::getline(in, line) || line.rfind("#folds\t", 0) != 0)
    throw FormatError("fold plan line 1: expected \"#folds<TAB>k\"");
  try {
    plan.k = std::stoul(line.substr(7));
  } catch (const std::exception&) {
    throw FormatError("fold plan line 1: bad fold count");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    std::size_t fold = 0;
    try {
      if (tab == std::string::npos) throw std::invalid_argument("tab");
      fold = std::stoul(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw FormatError("fold plan line " + std::to_string(line_no) + ": expected \"location<TAB>fold\"");
    }
    if (fold < 1 || fold > plan.k)
      throw FormatError("fold plan line " + std::to_string(line_no) + ": fold " + std::to_string(fold) +
                        " outside 1.." + std::to_string(plan.k));
    if (!plan.location_fold.emplace(line.substr(0, tab), fold).second)
      throw FormatError("fold plan line " + std::to_string(line_no) + ": duplicate location");
  }
  return plan;
}

void write_fold_plan(const std::filesystem::path& path, const FoldPlan& plan) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << format_fold_plan(plan);
}

FoldPlan read_fold_plan(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_fold_plan(ss.str());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

EvalReport evaluate_predictions(std::span<const std::size_t> predicted, std::span<const std::size_t> truth,
                                std::size_t n_classes) {
  if (predicted.size() != truth.size())
    throw AlignmentError("evaluate: " + std::to_string(predicted.size()) + " predictions for " +
                         std::to_string(truth.size()) + " labels");
  EvalReport r;
  r.n_classes = n_classes;
  r.per_class_total.assign(n_classes, 0);
  r.per_class_correct.assign(n_classes, 0);
  r.confusion.assign(n_classes, std::vector<std::size_t>(n_classes, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= n_classes) throw InputError("evaluate: unknown label " + std::to_string(truth[i]));
    if (predicted[i] >= n_classes) throw InputError("evaluate: unknown prediction " + std::to_string(predicted[i]));
    ++r.per_class_total[truth[i]];
    ++r.confusion[truth[i]][predicted[i]];
    if (predicted[i] == truth[i]) {
      ++r.per_class_correct[truth[i]];
      ++correct;
    }
  }
  r.per_class_accuracy.resize(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c)
    r.per_class_accuracy[c] = r.per_class_total[c] == 0
                                  ? std::numeric_limits<double>::quiet_NaN()
                                  : 100.0 * static_cast<double>(r.per_class_correct[c]) /
                                        static_cast<double>(r.per_class_total[c]);
  r.average = average_accuracy(r.per_class_accuracy);
  r.raw_accuracy = truth.empty() ? std::numeric_limits<double>::quiet_NaN()
                                 : 100.0 * static_cast<double>(correct) / static_cast<double>(truth.size());
  return r;
}

EvalReport evaluate(const ScoreMatrix& scores, const std::map<std::string, std::size_t>& truth) {
  scores.validate();
  std::vector<std::size_t> labels;
  for (const auto& id : scores.ids) {
    const auto it = truth.find(id);
    if (it == truth.end()) throw InputError("evaluate: no label for segment '" + id + "'");
    labels.push_back(it->second);
  }
  return evaluate_predictions(argmax_labels(scores), labels, scores.n_classes);
}

double average_accuracy(std::span<const double> per_class) {
  double sum = 0.0;
  std::size_t n = 0;
  for (double v : per_class)
    if (!std::isnan(v)) {
      sum += v;
      ++n;
    }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(n);
}

std::string scene_title(std::string_view label) {
  std::string out;
  bool start = true;
  for (char ch : label) {
    if (ch == '_') {
      out.push_back(' ');
      start = true;
      continue;
    }
    out.push_back(start ? static_cast<char>(std::toupper(static_cast<unsigned char>(ch))) : ch);
    start = false;
  }
  return out;
}

std::string format_report(std::span<const ReportColumn> columns) {
  std::size_t n_rows = 0;
  for (const auto& c : columns) n_rows = std::max(n_rows, c.per_class.size());
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n_rows; ++i)
    names.push_back(i < kSceneLabels.size() ? scene_title(kSceneLabels[i]) : "Class " + std::to_string(i));
  std::size_t name_w = std::string("Scene label").size();
  for (const auto& n : names) name_w = std::max(name_w, n.size());
  std::vector<std::size_t> col_w;
  for (const auto& c : columns) col_w.push_back(std::max<std::size_t>(c.title.size(), std::string("Accuracy [%]").size()));

  auto pad_right = [](std::string s, std::size_t w) { return s + std::string(w > s.size() ? w - s.size() : 0, ' '); };
  auto pad_left = [](std::string s, std::size_t w) { return std::string(w > s.size() ? w - s.size() : 0, ' ') + s; };
  std::size_t total_w = name_w;
  for (auto w : col_w) total_w += 2 + w;
  const std::string rule(total_w, '-');

  std::string out = rule + "\n" + pad_right("", name_w);
  for (std::size_t j = 0; j < columns.size(); ++j) out += "  " + pad_left(columns[j].title, col_w[j]);
  out += "\n" + pad_right("Scene label", name_w);
  for (std::size_t j = 0; j < columns.size(); ++j) out += "  " + pad_left("Accuracy [%]", col_w[j]);
  out += "\n" + rule + "\n";
  for (std::size_t i = 0; i < n_rows; ++i) {
    out += pad_right(names[i], name_w);
    for (std::size_t j = 0; j < columns.size(); ++j) {
      const double v = i < columns[j].per_class.size() ? columns[j].per_class[i] : std::nan("");
      out += "  " + pad_left(one_decimal(v), col_w[j]);
    }
    out += "\n";
  }
  out += rule + "\n" + pad_right("Average", name_w);
  for (std::size_t j = 0; j < columns.size(); ++j)
    out += "  " + pad_left(one_decimal(average_accuracy(columns[j].per_class)), col_w[j]);
  out += "\n" + rule + "\n";
  return out;
}

std::string format_confusion(const EvalReport& r) {
  std::string out = "true\\predicted";
  for (std::size_t c = 0; c < r.n_classes; ++c)
    out += "\t" + (c < kSceneLabels.size() ? std::string(kSceneLabels[c]) : std::to_string(c));
  out += "\n";
  for (std::size_t t = 0; t < r.n_classes; ++t) {
    out += t < kSceneLabels.size() ? std::string(kSceneLabels[t]) : std::to_string(t);
    for (std::size_t p = 0; p < r.n_classes; ++p) out += "\t" + std::to_string(r.confusion[t][p]);
    out += "\n";
  }
  return out;
}

}  // namespace ascnet
