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

#include <set>
#include <sstream>

#include "ascnet/topology.hpp"
#include "gtest/gtest.h"
#include "table_check.hpp"

namespace ascnet {
namespace {

std::size_t index_of(const NetworkSpec& spec, std::string_view name) {
  for (std::size_t i = 0; i < spec.layers.size(); ++i)
    if (spec.layers[i].name == name) return i;
  ADD_FAILURE() << "no layer " << name;
  return 0;
}

std::vector<DeviationEntry> shipped_ledger() {
  return read_deviation_ledger(std::filesystem::path(ASCNET_SOURCE_DIR) / "data" / "deviations.tsv");
}

TEST(PrintedCountTest, WithinOneUnitOfLastSignificantDigit) {
  EXPECT_TRUE(tables::printed_matches(9248, "9.2K"));
  EXPECT_TRUE(tables::printed_matches(9299, "9.2K"));
  EXPECT_FALSE(tables::printed_matches(9300, "9.2K"));
  EXPECT_TRUE(tables::printed_matches(393472, "394K"));
  EXPECT_TRUE(tables::printed_matches(591360, "590K"));
  EXPECT_FALSE(tables::printed_matches(600000, "590K"));
  EXPECT_TRUE(tables::printed_matches(2565, "2560"));
  EXPECT_FALSE(tables::printed_matches(2570, "2560"));
  EXPECT_FALSE(tables::printed_matches(3072, "1K"));
  EXPECT_TRUE(tables::printed_matches(608, "608"));
  EXPECT_FALSE(tables::printed_matches(609, "608"));
  EXPECT_TRUE(tables::printed_matches(0, "--"));
}

TEST(VggTest, TabulatedExamples) {
  const NetworkSpec s = build_vgg();
  const auto shapes = propagate_shapes(s, 128);
  EXPECT_EQ(shapes[index_of(s, "MaxPooling-6")], (Shape{4, 128, 256}));
  EXPECT_EQ(shapes[index_of(s, "Flatten")], (Shape{1024}));
  EXPECT_EQ(param_count(s.layers[index_of(s, "Conv2D-2-2")]), 36928u);
  EXPECT_EQ(param_count(s.layers[index_of(s, "Dense2")]), 65792u);
  EXPECT_EQ(param_count(s.layers[index_of(s, "Conv2D-1-1")]), 320u);
  EXPECT_EQ(param_count(s.layers[index_of(s, "AttentionPooling")]), 66048u);
  EXPECT_EQ(param_count(s.layers[index_of(s, "Dense1")]), 262400u);
}

TEST(LcnnTest, TabulatedExamples) {
  const NetworkSpec s = build_lcnn();
  const auto shapes = propagate_shapes(s, 128);
  EXPECT_EQ(param_count(s.layers[index_of(s, "Conv2D-1-1")]), 832u);
  EXPECT_EQ(shapes[index_of(s, "MFM-6-2")].back(), 96u);
  EXPECT_EQ(shapes[index_of(s, "Flatten")], (Shape{384}));
  EXPECT_EQ(param_count(s.layers[index_of(s, "BatchNorm-2")]), 256u);
  EXPECT_EQ(s.layers[index_of(s, "BatchNorm-1")].norm_axis, NormAxis::frequency);
}

TEST(XvectorTest, TabulatedExamples) {
  const NetworkSpec s = build_xvector();
  const auto shapes = propagate_shapes(s, 128);
  EXPECT_EQ(param_count(s.layers[index_of(s, "Conv1D-1")]), 327936u);
  EXPECT_EQ(shapes[index_of(s, "AttentionPooling")], (Shape{1536}));
  EXPECT_EQ(param_count(s.layers[index_of(s, "Dense1")]), 393472u);
  EXPECT_EQ(param_count(s.layers[index_of(s, "Conv1D-5")]), 65792u);
  EXPECT_EQ(param_count(s.layers[index_of(s, "AttentionPooling")]), 591360u);
  EXPECT_EQ(s.layers[index_of(s, "BatchNorm-1")].norm_axis, NormAxis::feature);
}

TEST(TopologyTest, TotalsFromClosedForm) {
  EXPECT_EQ(param_count(build_vgg()).total, 3928810u);
  EXPECT_EQ(param_count(build_lcnn()).total, 571018u);
  EXPECT_EQ(param_count(build_xvector()).total, 2245130u);
}

TEST(TopologyTest, EveryTableCellMatchesOrIsLedgered) {
  const auto ledger = shipped_ledger();
  const std::vector<std::pair<NetworkSpec, const std::vector<tables::Row>*>> cases{
      {build_vgg(), &tables::vgg()}, {build_lcnn(), &tables::lcnn()},
      {build_xvector(), &tables::xvector()}};
  std::set<std::tuple<std::string, std::string, std::string>> mismatched;
  for (const auto& [spec, rows] : cases) {
    const auto rep = tables::check_table(spec, *rows, ledger);
    ASSERT_TRUE(rep.structure_ok) << rep.structure_error;
    EXPECT_EQ(rep.rows_checked, rows->size());
    for (const auto& m : rep.mismatches) {
      EXPECT_TRUE(m.on_ledger) << spec.name << " " << m.layer << " " << m.column << ": table "
                               << m.table_value << ", computed " << m.computed_value;
      mismatched.insert({std::string(to_string(spec.kind)), m.layer, m.column});
    }
  }
  // No stale ledger rows: each entry names a real mismatch with its computed value.
  for (const auto& e : ledger) EXPECT_TRUE(mismatched.count({e.network, e.layer, e.column})) << e.layer;
  EXPECT_EQ(mismatched.size(), ledger.size());
}

TEST(TopologyTest, LedgerComputedValuesAreCurrent) {
  for (const auto& e : shipped_ledger()) {
    if (e.column != "params") continue;
    const NetworkSpec s = build_topology(parse_topology(e.network));
    EXPECT_EQ(std::to_string(param_count(s.layers[index_of(s, e.layer)])), e.computed_value);
  }
}

TEST(TopologyTest, FinalLayerIsTenWaySoftmaxDense) {
  for (auto kind : {TopologyKind::vgg, TopologyKind::lcnn, TopologyKind::xvector}) {
    const NetworkSpec s = build_topology(kind);
    ASSERT_GE(s.layers.size(), 2u);
    EXPECT_EQ(s.layers.back().kind, LayerKind::softmax);
    EXPECT_EQ(s.layers[s.layers.size() - 2].kind, LayerKind::dense);
    EXPECT_EQ(s.layers[s.layers.size() - 2].out_channels, 10u);
  }
}

TEST(TopologyTest, SegmentLengthOnlyChangesTimeAxis) {
  for (auto kind : {TopologyKind::vgg, TopologyKind::lcnn, TopologyKind::xvector}) {
    const NetworkSpec s = build_topology(kind);
    const auto a = propagate_shapes(s, 128), b = propagate_shapes(s, 512);
    EXPECT_EQ(a.back(), b.back());
    EXPECT_EQ(a.back(), (Shape{10}));
  }
}

TEST(TopologyTest, WidthDivisor) {
  TopologyOptions o;
  o.width_divisor = 4;
  const NetworkSpec v = build_vgg(o);
  EXPECT_EQ(propagate_shapes(v, 16).back(), (Shape{10}));
  EXPECT_EQ(v.layers[index_of(v, "Conv2D-6-2")].out_channels, 64u);
  const NetworkSpec l = build_lcnn(o);
  EXPECT_EQ(propagate_shapes(l, 16)[index_of(l, "Flatten")], (Shape{4 * 24}));
  const NetworkSpec x = build_xvector(o);
  EXPECT_EQ(propagate_shapes(x, 16)[index_of(x, "AttentionPooling")], (Shape{384}));
  o.width_divisor = 3;
  EXPECT_THROW(build_vgg(o), ConfigError);
  TopologyOptions bad;
  bad.n_mels = 100;
  EXPECT_THROW(build_lcnn(bad), ConfigError);
}

TEST(TopologyTest, ChainingErrorsNameTheLayer) {
  NetworkSpec s = build_vgg();
  s.layers[2].in_channels = 7;
  try {
    propagate_shapes(s, 128);
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("Conv2D-1-2"), std::string::npos);
  }
}

TEST(TopologyTest, SpecHashIsStableAndDiscriminating) {
  EXPECT_EQ(spec_hash(build_vgg()), spec_hash(build_vgg()));
  EXPECT_NE(spec_hash(build_vgg()), spec_hash(build_lcnn()));
  TopologyOptions o;
  o.width_divisor = 2;
  EXPECT_NE(spec_hash(build_xvector()), spec_hash(build_xvector(o)));
}

TEST(TopologyTest, ParseTopologyNames) {
  EXPECT_EQ(parse_topology("xvec"), TopologyKind::xvector);
  EXPECT_EQ(parse_topology("lcnn"), TopologyKind::lcnn);
  EXPECT_THROW(parse_topology("resnet"), ConfigError);
}

TEST(LedgerTest, RejectsMalformedRows) {
  std::istringstream bad("network\tlayer\tcolumn\ttable_value\tcomputed_value\treason\nvgg\tx\tparams\n");
  EXPECT_THROW(read_deviation_ledger(bad), FormatError);
  std::istringstream col("h\nvgg\tx\tflops\t1\t2\tr\n");
  EXPECT_THROW(read_deviation_ledger(col), FormatError);
}

}  // namespace
}  // namespace ascnet
