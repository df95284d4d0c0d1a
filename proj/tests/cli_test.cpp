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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ascnet/dataset.hpp"
#include "ascnet/errors.hpp"
#include "ascnet/fusion.hpp"

namespace {

namespace fs = std::filesystem;
using ascnet::cli::run;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("ascnet_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

TEST(Cli, UnknownSubcommandIsUsageError) {
  const auto r = call({"frobnicate"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("frobnicate"), std::string::npos);
}

TEST(Cli, MissingSubcommandIsUsageError) { EXPECT_EQ(call({}).code, 1); }

TEST(Cli, EvalOnOneHotTruthReportsFullAccuracy) {
  const auto dir = scratch("eval");
  std::string manifest = "filename\tscene_label\n";
  ascnet::ScoreMatrix s;
  s.system = "truth";
  for (std::size_t c = 0; c < ascnet::kNumClasses; ++c) {
    for (int loc = 0; loc < 2; ++loc) {
      const std::string scene(ascnet::kSceneLabels[c]);
      const std::string id = scene + "-lyon-" + std::to_string(loc) + "-" + std::to_string(c) + "-a";
      manifest += "audio/" + id + ".wav\t" + scene + "\n";
      std::vector<double> row(ascnet::kNumClasses, 0.0);
      row[c] = 1.0;
      s.append(id, row);
    }
  }
  write(dir / "meta.csv", manifest);
  ascnet::write_scores(dir / "truth.tsv", s);
  const auto r = call({"eval", "--scores", (dir / "truth.tsv").string(), "--manifest", (dir / "meta.csv").string(),
                       "--out", (dir / "report.txt").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::size_t hits = 0;
  for (std::size_t pos = 0; (pos = r.out.find("100.0", pos)) != std::string::npos; ++pos) ++hits;
  EXPECT_GE(hits, ascnet::kNumClasses + 1);
  EXPECT_EQ(bytes(dir / "report.txt"), r.out);
}

TEST(Cli, ConfigRejectsUnknownKeys) {
  EXPECT_THROW(ascnet::cli::parse_run_config(R"({"lr0": 0.001, "learning_rate": 1})"), ascnet::ConfigError);
  EXPECT_THROW(ascnet::cli::parse_run_config(R"({"max_epochs": "many"})"), ascnet::ConfigError);
  const auto c = ascnet::cli::parse_run_config(R"({"topology": "xvec", "max_epochs": 7})");
  EXPECT_EQ(c.topology, ascnet::TopologyKind::xvector);
  EXPECT_EQ(c.train.max_epochs, 7);
  EXPECT_EQ(c.train.batch_size, 128u);
  EXPECT_EQ(c.train.decay_end_epoch, 500);
}

TEST(Cli, BadConfigFileIsUsageErrorNamingFile) {
  const auto dir = scratch("config");
  write(dir / "run.json", R"({"bogus": 1})");
  write(dir / "meta.csv", "filename\tscene_label\n");
  write(dir / "folds.tsv", "#folds\t4\n");
  const auto r = call({"train", "--manifest", (dir / "meta.csv").string(), "--features-dir", dir.string(),
                       "--folds-file", (dir / "folds.tsv").string(), "--fold", "1", "--config",
                       (dir / "run.json").string(), "--out", (dir / "m.ckpt").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("run.json"), std::string::npos);
  EXPECT_NE(r.err.find("bogus"), std::string::npos);
}

TEST(Cli, MissingAudioIsDataErrorNamingFile) {
  const auto dir = scratch("missing");
  write(dir / "meta.csv", "filename\tscene_label\naudio/bus-lyon-1-2-a.wav\tbus\n");
  const auto r = call({"features", "--manifest", (dir / "meta.csv").string(), "--audio-dir", dir.string(), "--out",
                       (dir / "feat").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bus-lyon-1-2-a.wav"), std::string::npos);
}

TEST(Cli, StrictManifestRejectsBadRows) {
  const auto dir = scratch("strict");
  write(dir / "meta.csv", "filename\tscene_label\naudio/bus-lyon-1-2-a.wav\tnowhere\n");
  const auto args = std::vector<std::string>{"folds", "--manifest", (dir / "meta.csv").string(), "--out",
                                             (dir / "folds.tsv").string(), "--strict"};
  const auto r = call(args);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("line 2"), std::string::npos);
}

// synth -> features -> folds -> train vgg -> predict -> eval, then every
// output-producing step again into a second directory, byte-compared.
TEST(Cli, EndToEndSmokeAndIdempotence) {
  const auto root = scratch("e2e");
  const auto data = root / "data";
  ASSERT_EQ(call({"synth", "--out", data.string(), "--per-class", "4", "--seconds", "3", "--seed", "5"}).code, 0);
  write(root / "run.json", R"({"topology": "vgg", "width_divisor": 8, "max_epochs": 2, "batch_size": 8})");
  const auto manifest = (data / "meta.csv").string();

  auto pipeline = [&](const fs::path& out) {
    fs::create_directories(out);
    auto r = call({"features", "--manifest", manifest, "--audio-dir", data.string(), "--out", (out / "feat").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    r = call({"folds", "--manifest", manifest, "--out", (out / "folds.tsv").string(), "--seed", "5"});
    ASSERT_EQ(r.code, 0) << r.err;
    r = call({"train", "--manifest", manifest, "--features-dir", (out / "feat").string(), "--folds-file",
              (out / "folds.tsv").string(), "--fold", "1", "--config", (root / "run.json").string(), "--seed", "5",
              "--out", (out / "vgg.ckpt").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find('\t'), std::string::npos);
    r = call({"predict", "--checkpoint", (out / "vgg.ckpt").string(), "--manifest", manifest, "--features-dir",
              (out / "feat").string(), "--folds-file", (out / "folds.tsv").string(), "--fold", "1", "--topology",
              "vgg", "--config", (root / "run.json").string(), "--out", (out / "vgg.tsv").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    r = call({"eval", "--scores", (out / "vgg.tsv").string(), "--manifest", manifest});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("Average"), std::string::npos);
  };
  pipeline(root / "a");
  pipeline(root / "b");
  for (const auto* f : {"folds.tsv", "vgg.ckpt", "vgg.tsv"}) EXPECT_EQ(bytes(root / "a" / f), bytes(root / "b" / f)) << f;
  for (const auto& e : fs::directory_iterator(root / "a" / "feat"))
    EXPECT_EQ(bytes(e.path()), bytes(root / "b" / "feat" / e.path().filename()));

  const auto wrong = call({"predict", "--checkpoint", (root / "a" / "vgg.ckpt").string(), "--manifest", manifest,
                           "--features-dir", (root / "a" / "feat").string(), "--topology", "lcnn", "--out",
                           (root / "x.tsv").string()});
  EXPECT_EQ(wrong.code, 2);
}

}  // namespace
