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

#include "ascnet/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ascnet/dataset.hpp"
#include "ascnet/dsp.hpp"
#include "ascnet/errors.hpp"
#include "ascnet/evalkit.hpp"
#include "ascnet/fusion.hpp"
#include "ascnet/wav.hpp"

namespace ascnet::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<ManifestRow> load_manifest(const std::string& path, bool strict, std::ostream& err) {
  const Manifest m = read_manifest(path, strict);
  for (const auto& w : m.warnings) err << "warning: " << path << ": " << w << '\n';
  for (const auto& e : m.errors) err << "warning: " << path << " line " << e.line << ": " << e.message << '\n';
  return m.rows;
}

fs::path audio_path(const fs::path& audio_dir, const ManifestRow& row) {
  const fs::path p = audio_dir / row.filename;
  if (fs::exists(p)) return p;
  const fs::path name = fs::path(row.filename).filename();
  for (const auto& alt : {audio_dir / name, audio_dir / "audio" / name})
    if (fs::exists(alt)) return alt;
  return p;
}

fs::path feature_path(const fs::path& dir, const ManifestRow& row) { return dir / (row.segment_id() + ".ascf"); }

LogMelFeatures load_features(const fs::path& dir, const ManifestRow& row) {
  try {
    return read_features(feature_path(dir, row));
  } catch (const Error& e) {
    throw InputError("segment '" + row.segment_id() + "': " + e.what());
  }
}

std::map<std::string, std::size_t> truth_by_id(const std::vector<ManifestRow>& rows) {
  std::map<std::string, std::size_t> t;
  for (const auto& r : rows) t[r.segment_id()] = r.label;
  return t;
}

std::vector<std::size_t> labels_for(const ScoreMatrix& s, const std::map<std::string, std::size_t>& truth) {
  std::vector<std::size_t> labels;
  for (const auto& id : s.ids) {
    const auto it = truth.find(id);
    if (it == truth.end()) throw InputError("no manifest label for segment '" + id + "'");
    labels.push_back(it->second);
  }
  return labels;
}

std::vector<ScoreMatrix> load_score_files(const std::vector<std::string>& paths) {
  std::vector<ScoreMatrix> out;
  for (const auto& p : paths) out.push_back(read_scores(p));
  return out;
}

std::string format_labels(const std::vector<std::string>& ids, const std::vector<std::size_t>& labels) {
  std::string out = "segment_id\tscene_label\n";
  for (std::size_t i = 0; i < ids.size(); ++i) out += ids[i] + "\t" + std::string(kSceneLabels.at(labels[i])) + "\n";
  return out;
}

std::pair<std::vector<std::string>, std::vector<std::size_t>> parse_labels(const fs::path& path) {
  std::istringstream in(slurp(path));
  std::string line;
  if (!std::getline(in, line) || line.rfind("segment_id\tscene_label", 0) != 0)
    throw FormatError(path.string() + " line 1: expected \"segment_id<TAB>scene_label\"");
  std::vector<std::string> ids;
  std::vector<std::size_t> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    const auto label = tab == std::string::npos ? std::nullopt : scene_index(line.substr(tab + 1));
    if (!label) throw FormatError(path.string() + " line " + std::to_string(line_no) + ": bad label row");
    ids.push_back(line.substr(0, tab));
    labels.push_back(*label);
  }
  return {ids, labels};
}

template <typename T>
T get_checked(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: key '" + key + "' has the wrong type");
  }
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  RunConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "topology") c.topology = parse_topology(get_checked<std::string>(v, key));
    else if (key == "width_divisor") c.options.width_divisor = get_checked<std::size_t>(v, key);
    else if (key == "n_mels") c.options.n_mels = get_checked<std::size_t>(v, key);
    else if (key == "lr0") c.train.lr0 = get_checked<double>(v, key);
    else if (key == "lr_final") c.train.lr_final = get_checked<double>(v, key);
    else if (key == "decay_start_epoch") c.train.decay_start_epoch = get_checked<int>(v, key);
    else if (key == "decay_end_epoch") c.train.decay_end_epoch = get_checked<int>(v, key);
    else if (key == "max_epochs") c.train.max_epochs = get_checked<int>(v, key);
    else if (key == "batch_size") c.train.batch_size = get_checked<std::size_t>(v, key);
    else if (key == "patience") c.train.patience = get_checked<int>(v, key);
    else if (key == "crop_len") c.train.crop_len = get_checked<std::size_t>(v, key);
    else if (key == "dropout_rate") c.train.dropout_rate = get_checked<double>(v, key);
    else if (key == "seed") c.train.seed = get_checked<std::uint64_t>(v, key);
    else throw ConfigError("config: unknown key '" + key + "'");
  }
  c.options.dropout_rate = c.train.dropout_rate;
  c.train.validate();
  return c;
}

RunConfig read_run_config(const std::string& path) {
  try {
    return parse_run_config(slurp(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Acoustic scene classification toolkit", "ascnet"};
  app.require_subcommand(1);

  std::string manifest, audio_dir, features_dir, topology, folds_file, config, out_path, checkpoint, model, fused;
  std::vector<std::string> scores, predictions;
  std::uint64_t seed = 0;
  std::size_t fold = 0, per_class = 16, k = 4;
  double seconds = 10.0;
  bool strict = false;

  auto* synth = app.add_subcommand("synth", "Generate the synthetic scene dataset");
  synth->add_option("--out", out_path, "Output directory")->required();
  synth->add_option("--per-class", per_class, "Segments per class")->capture_default_str();
  synth->add_option("--seconds", seconds, "Segment length in seconds")->capture_default_str();
  synth->add_option("--seed", seed, "Random seed")->capture_default_str();

  auto* features = app.add_subcommand("features", "Extract log-mel features for every manifest row");
  features->add_option("--manifest", manifest)->required();
  features->add_option("--audio-dir", audio_dir)->required();
  features->add_option("--out", out_path, "Feature cache directory")->required();
  features->add_flag("--strict", strict, "Fail on malformed manifest rows");

  auto* folds = app.add_subcommand("folds", "Plan location-grouped folds");
  folds->add_option("--manifest", manifest)->required();
  folds->add_option("--out", out_path, "Fold plan file")->required();
  folds->add_option("--k", k, "Fold count")->capture_default_str();
  folds->add_option("--seed", seed)->capture_default_str();
  folds->add_flag("--strict", strict);

  auto* train_cmd = app.add_subcommand("train", "Train one topology with one fold held out for validation");
  train_cmd->add_option("--manifest", manifest)->required();
  train_cmd->add_option("--features-dir", features_dir)->required();
  train_cmd->add_option("--folds-file", folds_file)->required();
  train_cmd->add_option("--fold", fold, "Validation fold (1-based)")->required();
  train_cmd->add_option("--topology", topology, "vgg, lcnn or xvec");
  train_cmd->add_option("--config", config, "JSON run config");
  auto* train_seed = train_cmd->add_option("--seed", seed);
  train_cmd->add_option("--out", out_path, "Checkpoint file")->required();
  train_cmd->add_flag("--strict", strict);

  auto* predict = app.add_subcommand("predict", "Score segments with a checkpoint");
  predict->add_option("--checkpoint", checkpoint)->required();
  predict->add_option("--manifest", manifest)->required();
  predict->add_option("--features-dir", features_dir)->required();
  predict->add_option("--folds-file", folds_file);
  predict->add_option("--fold", fold, "Only score this fold");
  predict->add_option("--topology", topology, "Expected topology");
  predict->add_option("--config", config, "Expected topology options");
  predict->add_option("--out", out_path, "Score TSV")->required();
  predict->add_flag("--strict", strict);

  auto* fuse = app.add_subcommand("fuse", "Logistic-regression score fusion");
  fuse->require_subcommand(1);
  auto* fuse_fit = fuse->add_subcommand("fit", "Fit fusion weights");
  fuse_fit->add_option("--scores", scores, "Score TSV per system")->required();
  fuse_fit->add_option("--manifest", manifest)->required();
  fuse_fit->add_option("--out", out_path, "Model file")->required();
  auto* fuse_apply = fuse->add_subcommand("apply", "Apply fusion weights");
  fuse_apply->add_option("--model", model)->required();
  fuse_apply->add_option("--scores", scores)->required();
  fuse_apply->add_option("--out", out_path)->required();

  auto* avg = app.add_subcommand("avg", "Average score files over folds");
  avg->add_option("--scores", scores)->required();
  avg->add_option("--out", out_path)->required();

  auto* vote = app.add_subcommand("vote", "Majority vote with fused-score tie-break");
  vote->add_option("--scores", scores, "Score TSV per network")->required();
  vote->add_option("--fused", fused, "Fused score TSV")->required();
  vote->add_option("--out", out_path, "Label TSV")->required();

  auto* eval = app.add_subcommand("eval", "Per-scene accuracy report");
  eval->add_option("--scores", scores, "Score TSV per system");
  eval->add_option("--predictions", predictions, "Label TSV per system");
  eval->add_option("--manifest", manifest)->required();
  eval->add_option("--out", out_path, "Report file");

  if (!args.empty() && !args.front().starts_with("-")) {
    const auto named = app.get_subcommands([&](CLI::App* s) { return s->get_name() == args.front(); });
    if (named.empty()) {
      err << "error: unknown subcommand '" << args.front() << "'\n\n" << app.help();
      return kUsage;
    }
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  try {
    if (*synth) {
      SynthConfig cfg;
      cfg.per_class = per_class;
      cfg.seconds = seconds;
      cfg.seed = seed;
      const auto rows = synth_dataset(cfg, out_path);
      out << "wrote " << rows.size() << " files to " << out_path << '\n';
    } else if (*features) {
      const auto rows = load_manifest(manifest, strict, err);
      fs::create_directories(out_path);
      for (const auto& r : rows) {
        const auto src = audio_path(audio_dir, r);
        LogMelFeatures f;
        try {
          f = extract_features(read_wav(src));
        } catch (const NumericError&) {
          throw;
        } catch (const Error& e) {
          throw InputError(src.string() + ": " + e.what());
        }
        write_features(feature_path(out_path, r), f);
      }
      out << "extracted " << rows.size() << " segments to " << out_path << '\n';
    } else if (*folds) {
      const auto rows = load_manifest(manifest, strict, err);
      const auto plan = make_folds(rows, k, seed);
      write_fold_plan(out_path, plan);
      const auto counts = fold_class_counts(plan, rows);
      for (std::size_t c = 0; c < counts.size(); ++c) {
        if (std::all_of(counts[c].begin(), counts[c].end(), [](std::size_t v) { return v == 0; })) continue;
        out << kSceneLabels.at(c);
        for (auto v : counts[c]) out << '\t' << v;
        out << '\n';
      }
    } else if (*train_cmd) {
      RunConfig rc = config.empty() ? RunConfig{} : read_run_config(config);
      if (!topology.empty()) rc.topology = parse_topology(topology);
      if (*train_seed) rc.train.seed = seed;
      rc.options.dropout_rate = rc.train.dropout_rate;
      const auto rows = load_manifest(manifest, strict, err);
      const auto plan = read_fold_plan(folds_file);
      if (fold < 1 || fold > plan.k)
        throw ConfigError("--fold " + std::to_string(fold) + " outside 1.." + std::to_string(plan.k));
      std::vector<LabeledSegment> tr, va;
      for (const auto& r : rows) {
        LabeledSegment s{r.segment_id(), r.label, load_features(features_dir, r)};
        (plan.fold_of(r) == fold ? va : tr).push_back(std::move(s));
      }
      const auto spec = build_topology(rc.topology, rc.options);
      const auto result = train(spec, tr, va, rc.train, &out);
      save_checkpoint(out_path, result.best);
      err << "best epoch " << result.best.epoch << " of " << result.best.epochs_run << ", validation loss "
          << result.best.best_val_loss << '\n';
    } else if (*predict) {
      const Checkpoint ckpt = load_checkpoint(checkpoint);
      std::optional<NetworkSpec> expected;
      if (!topology.empty() || !config.empty()) {
        RunConfig rc = config.empty() ? RunConfig{ckpt.topology, ckpt.options, {}} : read_run_config(config);
        if (!topology.empty()) rc.topology = parse_topology(topology);
        if (!config.empty()) rc.options.dropout_rate = rc.train.dropout_rate;
        expected = build_topology(rc.topology, rc.options);
      }
      Predictor predictor(ckpt, expected);
      auto rows = load_manifest(manifest, strict, err);
      if (fold != 0) {
        if (folds_file.empty()) throw ConfigError("--fold needs --folds-file");
        const auto plan = read_fold_plan(folds_file);
        std::erase_if(rows, [&](const ManifestRow& r) { return plan.fold_of(r) != fold; });
      }
      ScoreMatrix s;
      s.system = fs::path(out_path).stem().string();
      for (const auto& r : rows) {
        const auto f = load_features(features_dir, r);
        s.append(r.segment_id(), predictor.predict(f));
      }
      write_scores(out_path, s);
      out << "scored " << s.rows() << " segments\n";
    } else if (*fuse_fit) {
      const auto systems = load_score_files(scores);
      const auto truth = truth_by_id(load_manifest(manifest, false, err));
      const auto fit = fit_calibration(systems, labels_for(systems.front(), truth));
      write_calibration(out_path, fit.model);
      out << "nll " << fit.initial_nll << " -> " << fit.final_nll << " after " << fit.iterations << " iterations"
          << (fit.converged ? "" : " (not converged)") << '\n';
    } else if (*fuse_apply) {
      const auto m = read_calibration(model);
      auto fusedm = apply_calibration(m, load_score_files(scores));
      write_scores(out_path, fusedm);
    } else if (*avg) {
      write_scores(out_path, average_fold_scores(load_score_files(scores)));
    } else if (*vote) {
      const auto systems = load_score_files(scores);
      const auto f = read_scores(fused);
      std::vector<std::vector<std::size_t>> preds;
      for (const auto& s : systems) {
        if (s.ids != f.ids) throw AlignmentError(s.system + ": segment order differs from " + fused);
        preds.push_back(argmax_labels(s));
      }
      spit(out_path, format_labels(f.ids, majority_vote(preds, f)));
    } else if (*eval) {
      if (scores.empty() && predictions.empty()) throw ConfigError("eval needs --scores or --predictions");
      const auto truth = truth_by_id(load_manifest(manifest, false, err));
      std::vector<ReportColumn> cols;
      std::vector<EvalReport> reports;
      for (const auto& p : scores) {
        reports.push_back(evaluate(read_scores(p), truth));
        cols.push_back({fs::path(p).stem().string(), reports.back().per_class_accuracy});
      }
      for (const auto& p : predictions) {
        const auto [ids, pred] = parse_labels(p);
        std::vector<std::size_t> t;
        for (const auto& id : ids) {
          const auto it = truth.find(id);
          if (it == truth.end()) throw InputError(p + ": no manifest label for segment '" + id + "'");
          t.push_back(it->second);
        }
        reports.push_back(evaluate_predictions(pred, t));
        cols.push_back({fs::path(p).stem().string(), reports.back().per_class_accuracy});
      }
      std::string text = format_report(cols);
      for (std::size_t i = 0; i < reports.size(); ++i) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.1f", reports[i].raw_accuracy);
        text += cols[i].title + " segment accuracy [%]: " + buf + "\n";
      }
      if (reports.size() == 1) text += "\n" + format_confusion(reports.front());
      out << text;
      if (!out_path.empty()) spit(out_path, text);
    }
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return kNumericError;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ContractError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kOk;
}

}  // namespace ascnet::cli
