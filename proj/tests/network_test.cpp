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


#include "ascnet/network.hpp"
#include "gradient_suite.hpp"
#include "gtest/gtest.h"
#include "test_util.hpp"

namespace ascnet {
namespace {

using testing::random_tensor;

TEST(NetworkTest, ElementCountMatchesClosedForm) {
  for (auto kind : {TopologyKind::vgg, TopologyKind::lcnn, TopologyKind::xvector}) {
    const NetworkSpec spec = build_topology(kind);
    Network<float> net(spec, 1);
    EXPECT_EQ(net.element_count(), param_count(spec).total) << spec.name;
  }
}

TEST(NetworkTest, AcceptsTrainingAndEvaluationLengths) {
  TopologyOptions o;
  o.width_divisor = 4;
  for (auto kind : {TopologyKind::vgg, TopologyKind::lcnn, TopologyKind::xvector}) {
    Network<float> net(build_topology(kind, o), 2);
    for (std::size_t n : {128u, 512u}) {
      Tensor<float> x(net.spec().is_2d() ? Shape{1, 256, n, 1} : Shape{1, n, 256});
      CounterRng rng(3);
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<float>(rng.normal());
      Tape<float> tape(false);
      Tensor<float> y = net.forward(tape, x, Mode::infer, rng);
      EXPECT_EQ(y.shape(), (Shape{1, 10})) << net.spec().name << " N=" << n;
      for (std::size_t i = 0; i < y.size(); ++i) EXPECT_TRUE(std::isfinite(y[i]));
    }
  }
}

TEST(NetworkTest, RejectsWrongInputShape) {
  Network<float> net(build_vgg(), 1);
  Tape<float> tape(false);
  CounterRng rng(1);
  EXPECT_THROW(net.forward(tape, Tensor<float>({1, 128, 16, 1}), Mode::infer, rng), DimensionError);
}

TEST(NetworkTest, SameSeedSameWeights) {
  TopologyOptions o;
  o.width_divisor = 4;
  Network<float> a(build_lcnn(o), 7), b(build_lcnn(o), 7), c(build_lcnn(o), 8);
  bool differs = false;
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    const auto& pa = a.parameters()[i].value;
    const auto& pb = b.parameters()[i].value;
    const auto& pc = c.parameters()[i].value;
    for (std::size_t k = 0; k < pa.size(); ++k) {
      ASSERT_EQ(pa[k], pb[k]);
      differs |= pa[k] != pc[k];
    }
  }
  EXPECT_TRUE(differs);
}

TEST(NetworkTest, LoadStateAcrossPrecisions) {
  TopologyOptions o;
  o.width_divisor = 4;
  Network<float> f(build_xvector(o), 4);
  Network<double> d(build_xvector(o), 5);
  d.load_state(f);
  for (std::size_t i = 0; i < f.parameters().size(); ++i)
    for (std::size_t k = 0; k < f.parameters()[i].value.size(); ++k)
      ASSERT_EQ(static_cast<float>(d.parameters()[i].value[k]), f.parameters()[i].value[k]);
  EXPECT_THROW(d.set_state("nope", std::vector<double>{1.0}), IntegrityError);
}

TEST(NetworkTest, InferModeIsDeterministicAndBatchIndependent) {
  TopologyOptions o;
  o.width_divisor = 4;
  Network<float> net(build_xvector(o), 9);
  CounterRng rng(10);
  Tensor<float> x({2, 20, 256});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<float>(rng.normal());
  Tensor<float> x0({1, 20, 256});
  std::copy(x.data().begin(), x.data().begin() + 20 * 256, x0.data().begin());
  Tape<float> tape(false);
  Tensor<float> y = net.forward(tape, x, Mode::infer, rng);
  Tensor<float> y0 = net.forward(tape, x0, Mode::infer, rng);
  for (std::size_t k = 0; k < 10; ++k) EXPECT_NEAR(y[k], y0[k], 1e-5f);
}

class NetworkGradientTest
    : public ::testing::TestWithParam<std::tuple<TopologyKind, std::uint64_t>> {};

TEST_P(NetworkGradientTest, FiniteDifferences) {
  const auto [kind, seed] = GetParam();
  for (const auto& r : testing::check_network_gradients(kind, seed)) {
    EXPECT_LT(r.result.max_rel_error, 1e-4) << r.name;
    EXPECT_LE(r.result.kinks_skipped, r.result.checked) << r.name;
  }
}

INSTANTIATE_TEST_SUITE_P(
    Scaled, NetworkGradientTest,
    ::testing::Combine(::testing::Values(TopologyKind::vgg, TopologyKind::lcnn, TopologyKind::xvector),
                       ::testing::Values<std::uint64_t>(0)),
    [](const auto& info) {
      return std::string(to_string(std::get<0>(info.param))) + "_seed" +
             std::to_string(std::get<1>(info.param));
    });

}  // namespace
}  // namespace ascnet
