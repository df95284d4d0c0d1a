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

#include "ascnet/fusion.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "ascnet/dataset.hpp"
#include "ascnet/errors.hpp"

namespace ascnet {
namespace {

void check_aligned(std::span<const ScoreMatrix> systems) {
  if (systems.empty()) throw ConfigError("fusion: no systems given");
  const auto& ref = systems.front();
  for (const auto& s : systems) {
    s.validate();
    if (s.n_classes != ref.n_classes)
      throw DimensionError("fusion: system '" + s.system + "' has a different class count");
    if (s.ids != ref.ids) {
      std::size_t i = 0;
      while (i < std::min(s.ids.size(), ref.ids.size()) && s.ids[i] == ref.ids[i]) ++i;
      throw AlignmentError("fusion: system '" + s.system + "' disagrees with '" + ref.system +
                           "' on segment order at row " + std::to_string(i + 1));
    }
  }
}

std::string to_text(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

// Objective and gradient at theta = (alpha..., beta...).
double objective(const std::vector<double>& theta, std::span<const ScoreMatrix> systems,
                 std::span<const std::size_t> labels, std::vector<double>* grad) {
  const std::size_t n_sys = systems.size(), k = systems.front().n_classes, n = labels.size();
  if (grad) grad->assign(theta.size(), 0.0);
  std::vector<double> z(k);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      double v = theta[n_sys + c];
      for (std::size_t s = 0; s < n_sys; ++s) v += theta[s] * systems[s].at(i, c);
      z[c] = v;
    }
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - mx);
    const double lse = mx + std::log(sum);
    total += lse - z[labels[i]];
    if (!grad) continue;
    for (std::size_t c = 0; c < k; ++c) {
      const double d = std::exp(z[c] - lse) - (c == labels[i] ? 1.0 : 0.0);
      (*grad)[n_sys + c] += d;
      for (std::size_t s = 0; s < n_sys; ++s) (*grad)[s] += d * systems[s].at(i, c);
    }
  }
  if (grad)
    for (double& g : *grad) g /= static_cast<double>(n);
  return total / static_cast<double>(n);
}

}  // namespace

void ScoreMatrix::append(const std::string& id, std::span<const double> scores) {
  if (scores.size() != n_classes) {
    throw DimensionError("scores for '" + id + "' have " + std::to_string(scores.size()) + " entries, expected " +
                         std::to_string(n_classes));
  }
  ids.push_back(id);
  values.insert(values.end(), scores.begin(), scores.end());
}

void ScoreMatrix::validate() const {
  if (values.size() != ids.size() * n_classes)
    throw DimensionError("score matrix '" + system + "' has " + std::to_string(values.size()) + " values for " +
                         std::to_string(ids.size()) + " segments");
  for (std::size_t i = 0; i < values.size(); ++i)
    if (!std::isfinite(values[i]))
      throw NumericError("score matrix '" + system + "' has a non-finite score for segment '" +
                         ids[i / n_classes] + "'");
}

std::vector<std::size_t> argmax_labels(const ScoreMatrix& s) {
  std::vector<std::size_t> out(s.rows());
  for (std::size_t i = 0; i < s.rows(); ++i) {
    const auto r = s.row(i);
    out[i] = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

double calibration_nll(const CalibrationModel& model, std::span<const ScoreMatrix> systems,
                       std::span<const std::size_t> labels) {
  check_aligned(systems);
  if (model.alpha.size() != systems.size() || model.beta.size() != systems.front().n_classes)
    throw ConfigError("calibration: model does not match the systems");
  std::vector<double> theta(model.alpha);
  theta.insert(theta.end(), model.beta.begin(), model.beta.end());
  return objective(theta, systems, labels, nullptr);
}

CalibrationFit fit_calibration(std::span<const ScoreMatrix> systems, std::span<const std::size_t> labels,
                               const FitOptions& options) {
  check_aligned(systems);
  const std::size_t n_sys = systems.size(), k = systems.front().n_classes;
  if (labels.size() != systems.front().rows())
    throw AlignmentError("calibration: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(systems.front().rows()) + " segments");
  if (labels.empty()) throw InputError("calibration: no segments");
  for (std::size_t l : labels)
    if (l >= k) throw IndexError("calibration: label " + std::to_string(l) + " out of range");
  if (std::all_of(labels.begin(), labels.end(), [&](std::size_t l) { return l == labels.front(); }))
    throw ConfigError("calibration: every label is class " + std::to_string(labels.front()) +
                      "; the fit is degenerate");

  std::vector<double> theta(n_sys, 1.0 / static_cast<double>(n_sys));
  theta.resize(n_sys + k, 0.0);
  std::vector<double> grad, trial(theta.size()), trial_grad;
  CalibrationFit fit;
  double f = objective(theta, systems, labels, &grad);
  fit.initial_nll = f;
  double step = 1.0;
  for (int it = 0; it < options.max_iterations; ++it) {
    double gmax = 0.0, g2 = 0.0;
    for (double g : grad) {
      gmax = std::max(gmax, std::abs(g));
      g2 += g * g;
    }
    if (gmax < options.gradient_tolerance) {
      fit.converged = true;
      break;
    }
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t j = 0; j < theta.size(); ++j) trial[j] = theta[j] - step * grad[j];
      const double ft = objective(trial, systems, labels, &trial_grad);
      if (ft <= f - options.armijo * step * g2) {
        theta.swap(trial);
        grad.swap(trial_grad);
        f = ft;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    fit.iterations = it + 1;
    if (!accepted) break;  // no descent possible at machine precision
    fit.nll_trace.push_back(f);
    step *= 2.0;
  }
  fit.final_nll = f;
  fit.model.alpha.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(n_sys));
  fit.model.beta.assign(theta.begin() + static_cast<std::ptrdiff_t>(n_sys), theta.end());
  for (const auto& s : systems) fit.model.systems.push_back(s.system);
  return fit;
}

ScoreMatrix apply_calibration(const CalibrationModel& model, std::span<const ScoreMatrix> systems) {
  check_aligned(systems);
  if (model.alpha.size() != systems.size()) {
    throw ConfigError("calibration: model has " + std::to_string(model.alpha.size()) + " systems, got " +
                      std::to_string(systems.size()));
  }
  const std::size_t k = systems.front().n_classes;
  if (model.beta.size() != k) throw ConfigError("calibration: beta length does not match the class count");
  ScoreMatrix out;
  out.system = "fused";
  out.n_classes = k;
  out.ids = systems.front().ids;
  out.values.assign(out.ids.size() * k, 0.0);
  for (std::size_t i = 0; i < out.ids.size(); ++i)
    for (std::size_t c = 0; c < k; ++c) {
      double v = model.beta[c];
      for (std::size_t s = 0; s < systems.size(); ++s) v += model.alpha[s] * systems[s].at(i, c);
      out.values[i * k + c] = v;
    }
  return out;
}

ScoreMatrix average_fold_scores(std::span<const ScoreMatrix> per_fold) {
  if (per_fold.empty()) throw ConfigError("average: no score matrices");
  const auto& ref = per_fold.front();
  ref.validate();
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ref.ids.size(); ++i)
    if (!index.emplace(ref.ids[i], i).second) throw AlignmentError("average: duplicate segment id '" + ref.ids[i] + "'");
  ScoreMatrix out = ref;
  out.system = "average";
  std::fill(out.values.begin(), out.values.end(), 0.0);
  for (const auto& m : per_fold) {
    m.validate();
    if (m.n_classes != ref.n_classes) throw DimensionError("average: class counts differ");
    if (m.rows() != ref.rows())
      throw AlignmentError("average: '" + m.system + "' has " + std::to_string(m.rows()) + " segments, '" +
                           ref.system + "' has " + std::to_string(ref.rows()));
    std::vector<bool> seen(ref.rows(), false);
    for (std::size_t i = 0; i < m.rows(); ++i) {
      const auto it = index.find(m.ids[i]);
      if (it == index.end() || seen[it->second])
        throw AlignmentError("average: segment '" + m.ids[i] + "' of '" + m.system + "' does not match");
      seen[it->second] = true;
      for (std::size_t c = 0; c < ref.n_classes; ++c) out.values[it->second * ref.n_classes + c] += m.at(i, c);
    }
  }
  for (double& v : out.values) v /= static_cast<double>(per_fold.size());
  return out;
}

std::vector<std::size_t> majority_vote(std::span<const std::vector<std::size_t>> predictions,
                                       const ScoreMatrix& fused) {
  if (predictions.empty()) throw ConfigError("vote: no prediction lists");
  fused.validate();
  for (std::size_t p = 0; p < predictions.size(); ++p)
    if (predictions[p].size() != fused.rows())
      throw AlignmentError("vote: prediction list " + std::to_string(p + 1) + " has " +
                           std::to_string(predictions[p].size()) + " entries, fused scores have " +
                           std::to_string(fused.rows()));
  const std::size_t k = fused.n_classes;
  std::vector<std::size_t> out(fused.rows());
  std::vector<std::size_t> votes(k);
  for (std::size_t i = 0; i < fused.rows(); ++i) {
    std::fill(votes.begin(), votes.end(), 0);
    for (const auto& p : predictions) {
      if (p[i] >= k) throw IndexError("vote: class " + std::to_string(p[i]) + " out of range");
      ++votes[p[i]];
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c) {
      if (votes[c] > votes[best] || (votes[c] == votes[best] && fused.at(i, c) > fused.at(i, best))) best = c;
    }
    out[i] = best;
  }
  return out;
}

std::string format_scores(const ScoreMatrix& s) {
  s.validate();
  std::string out = "#classes";
  for (std::size_t c = 0; c < s.n_classes; ++c)
    out += "\t" + (c < kSceneLabels.size() ? std::string(kSceneLabels[c]) : "class" + std::to_string(c));
  out += "\n";
  for (std::size_t i = 0; i < s.rows(); ++i) {
    out += s.ids[i];
    for (double v : s.row(i)) out += "\t" + to_text(v);
    out += "\n";
  }
  return out;
}

ScoreMatrix parse_scores(const std::string& text, const std::string& system) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("#classes", 0) != 0)
    throw FormatError("scores line 1: expected a \"#classes\" header");
  ScoreMatrix s;
  s.system = system;
  s.n_classes = static_cast<std::size_t>(std::count(line.begin(), line.end(), '\t'));
  if (s.n_classes == 0) throw FormatError("scores line 1: no class names");
  std::size_t line_no = 1;
  std::vector<double> row;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string id, field;
    std::getline(ls, id, '\t');
    row.clear();
    while (std::getline(ls, field, '\t')) {
      double v = 0.0;
      const auto r = std::from_chars(field.data(), field.data() + field.size(), v);
      if (r.ec != std::errc() || r.ptr != field.data() + field.size())
        throw FormatError("scores line " + std::to_string(line_no) + ": bad number '" + field + "'");
      row.push_back(v);
    }
    if (row.size() != s.n_classes)
      throw FormatError("scores line " + std::to_string(line_no) + ": expected " + std::to_string(s.n_classes) +
                        " scores, got " + std::to_string(row.size()));
    s.append(id, row);
  }
  return s;
}

void write_scores(const std::filesystem::path& path, const ScoreMatrix& s) { spit(path, format_scores(s)); }

ScoreMatrix read_scores(const std::filesystem::path& path) {
  try {
    return parse_scores(slurp(path), path.stem().string());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string format_calibration(const CalibrationModel& m) {
  nlohmann::ordered_json j;
  j["systems"] = m.systems;
  j["alpha"] = m.alpha;
  j["beta"] = m.beta;
  return j.dump(2) + "\n";
}

CalibrationModel parse_calibration(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    CalibrationModel m;
    m.systems = j.at("systems").get<std::vector<std::string>>();
    m.alpha = j.at("alpha").get<std::vector<double>>();
    m.beta = j.at("beta").get<std::vector<double>>();
    if (m.systems.size() != m.alpha.size()) throw FormatError("calibration: systems and alpha differ in length");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("calibration: ") + e.what());
  }
}

void write_calibration(const std::filesystem::path& path, const CalibrationModel& m) {
  spit(path, format_calibration(m));
}

CalibrationModel read_calibration(const std::filesystem::path& path) {
  try {
    return parse_calibration(slurp(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace ascnet
