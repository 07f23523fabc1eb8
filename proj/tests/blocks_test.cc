// Copyright 2026 The SCH Codec Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <map>

#include "sch/blocks.h"
#include "sch/errors.h"
#include "test_util.h"

namespace sch {
namespace {

using testing::GradCheck;
using testing::Projector;
using testing::RandomVar;

void Zero(Var<double>& v) { v.mutable_value().Fill(0.0); }

template <typename M>
void ExpectGradOk(M& module, const Var<double>& x_in, uint64_t seed, int samples = 16) {
  Rng rng(seed);
  testing::Jitter(module, rng, 0.1);
  Var<double> x = x_in;
  auto vars = testing::ParamsOf(module);
  vars.emplace_back("x", x);
  Projector proj(seed + 1);
  auto r = GradCheck([&] { return proj(module(x)); }, vars, samples);
  EXPECT_LE(r.max_relative_error, 1e-4) << r.worst;
}

TEST(ResidualBlock, ZeroSecondConvIsIdentity) {
  Rng rng(1);
  ResidualBlock<double> rb(8, 8, rng);
  Zero(rb.conv2.weight);
  Zero(rb.conv2.bias);
  Var<double> x = RandomVar<double>({2, 8, 6, 6}, rng, false);
  EXPECT_EQ(rb(x).value().storage(), x.value().storage());
}

TEST(ResidualBlock, Shapes) {
  Rng rng(2);
  ResidualBlock<float> rb(128, 128, rng);
  NoGradGuard guard;
  EXPECT_EQ(rb(Var<float>(Tensor<float>({1, 128, 64, 96}))).shape(),
            (Shape{1, 128, 64, 96}));
  ResidualBlock<float> stem(12, 32, rng);
  EXPECT_TRUE(stem.project);
  EXPECT_EQ(stem(Var<float>(Tensor<float>({1, 12, 16, 16}))).shape(),
            (Shape{1, 32, 16, 16}));
}

TEST(ResidualBlock, Gradients) {
  Rng rng(3);
  ResidualBlock<double> rb(4, 6, rng);
  ExpectGradOk(rb, RandomVar<double>({1, 4, 5, 5}, rng), 30);
}

TEST(ResidualBlockWithStride, HalvesResolution) {
  Rng rng(4);
  ResidualBlockWithStride<float> rbs(256, 256, rng);
  NoGradGuard guard;
  EXPECT_EQ(rbs(Var<float>(Tensor<float>({1, 256, 128, 128}))).shape(),
            (Shape{1, 256, 64, 64}));
}

TEST(ResidualBlockWithStride, ZeroMainPathLeavesSkip) {
  Rng rng(5);
  ResidualBlockWithStride<double> rbs(4, 6, rng);
  Zero(rbs.conv2.weight);
  Zero(rbs.conv2.bias);
  Var<double> x = RandomVar<double>({1, 4, 8, 8}, rng, false);
  Tensor<double> y = rbs(x).value();
  Tensor<double> skip = rbs.skip(x).value();
  EXPECT_EQ(y.storage(), skip.storage());
}

TEST(ResidualBlockWithStride, Gradients) {
  Rng rng(6);
  ResidualBlockWithStride<double> rbs(3, 4, rng);
  ExpectGradOk(rbs, RandomVar<double>({1, 3, 6, 6}, rng), 31);
}

TEST(ResidualBlockUpsample, DoublesResolution) {
  Rng rng(7);
  ResidualBlockUpsample<float> rbu(320, 256, rng);
  ResidualBlockWithStride<float> rbs(256, 320, rng);
  NoGradGuard guard;
  Var<float> y = rbu(Var<float>(Tensor<float>({1, 320, 16, 16})));
  EXPECT_EQ(y.shape(), (Shape{1, 256, 32, 32}));
  EXPECT_EQ(rbu(rbs(y)).shape(), y.shape());
}

TEST(ResidualBlockUpsample, ConstantInputStaysConstant) {
  Rng rng(8);
  ResidualBlockUpsample<double> rbu(4, 3, rng);
  // Tie every sub-pixel phase to the same filter so a constant map has no
  // reason to vary across the 2x2 phases; zero padding still perturbs the
  // border, so only the interior is checked.
  auto tie = [](SubpelConvLayer<double>& s) {
    Tensor<double>& w = s.conv.weight.mutable_value();
    Tensor<double>& b = s.conv.bias.mutable_value();
    const int64_t out = w.dim(0) / 4, per = w.numel() / w.dim(0);
    for (int64_t o = 0; o < out; ++o) {
      for (int64_t p = 1; p < 4; ++p) {
        for (int64_t i = 0; i < per; ++i) w[(o * 4 + p) * per + i] = w[o * 4 * per + i];
        b[o * 4 + p] = b[o * 4];
      }
    }
  };
  tie(rbu.subpel);
  tie(rbu.skip);
  Var<double> x(Tensor<double>({1, 4, 8, 8}, 0.7));
  Tensor<double> y = rbu(x).value();
  for (int64_t c = 0; c < 3; ++c) {
    const double ref = y[(c * 16 + 8) * 16 + 8];
    for (int64_t r = 3; r < 13; ++r) {
      for (int64_t q = 3; q < 13; ++q) {
        EXPECT_NEAR(y[(c * 16 + r) * 16 + q], ref, 1e-12);
      }
    }
  }
}

TEST(ResidualBlockUpsample, Gradients) {
  Rng rng(9);
  ResidualBlockUpsample<double> rbu(4, 3, rng);
  ExpectGradOk(rbu, RandomVar<double>({1, 4, 3, 3}, rng), 32);
}

SchStage<double> Stage(SchStageKind kind, int64_t c, int64_t ws = 4,
                       int64_t heads = 2, uint64_t seed = 10) {
  Rng rng(seed);
  return SchStage<double>(kind, c, ws, heads, 2, rng);
}

class SchStageTest : public ::testing::TestWithParam<SchStageKind> {};

TEST_P(SchStageTest, ZeroPostIsIdentity) {
  SchStage<double> st = Stage(GetParam(), 8);
  Zero(st.post.weight);
  Zero(st.post.bias);
  Rng rng(11);
  Var<double> x = RandomVar<double>({1, 8, 8, 8}, rng, false);
  EXPECT_EQ(st.Forward(x).value().storage(), x.value().storage());
}

TEST_P(SchStageTest, BranchesSeeHalfTheChannels) {
  SchStage<double> st = Stage(GetParam(), 16);
  Rng rng(12);
  SchStageTaps<double> taps;
  Var<double> x = RandomVar<double>({1, 16, 8, 8}, rng, false);
  Var<double> y = st.Forward(x, &taps);
  EXPECT_EQ(taps.attention.shape(), (Shape{1, 8, 8, 8}));
  EXPECT_EQ(taps.residual.shape(), (Shape{1, 8, 8, 8}));
  EXPECT_EQ(y.shape(), x.shape());
  EXPECT_EQ(st.residual.conv1.weight.dim(1), 8);
}

TEST_P(SchStageTest, Gradients) {
  SchStage<double> st = Stage(GetParam(), 16, 4, 2, 13);
  Rng rng(14);
  testing::Jitter(st, rng, 0.1);
  Var<double> x = RandomVar<double>({1, 16, 16, 16}, rng);
  auto vars = testing::ParamsOf(st);
  vars.emplace_back("x", x);
  Projector proj(15);
  auto r = GradCheck([&] { return proj(st.Forward(x)); }, vars, 12);
  EXPECT_LE(r.max_relative_error, 1e-4) << r.worst;
}

TEST_P(SchStageTest, OddWidthRejected) {
  Rng rng(16);
  EXPECT_THROW(SchStage<double>(GetParam(), 7, 4, 1, 2, rng), ConfigError);
}

INSTANTIATE_TEST_SUITE_P(Kinds, SchStageTest,
                         ::testing::Values(SchStageKind::kSpace, SchStageKind::kChannel));

std::map<std::string, Shape> ShapesOf(SchStage<double>& st) {
  std::map<std::string, Shape> out;
  st.Visit("", [&](const std::string& n, Var<double>& v) { out[n] = v.shape(); });
  return out;
}

TEST(SchStage, StagesDifferOnlyInAttentionTokens) {
  // 16 channels, 4x4 windows: stage I tokens carry C/2 = 8 features, stage II
  // tokens carry L = 16 features (one per window position).
  SchStage<double> one = Stage(SchStageKind::kSpace, 16);
  SchStage<double> two = Stage(SchStageKind::kChannel, 16);
  auto a = ShapesOf(one), b = ShapesOf(two);
  ASSERT_EQ(a.size(), b.size());
  for (const auto& [name, shape] : a) {
    ASSERT_TRUE(b.count(name)) << name;
    if (name.rfind(".attn", 0) != 0) EXPECT_EQ(shape, b[name]) << name;
  }
  EXPECT_EQ(a[".attn.qkv.weight"], (Shape{24, 8}));
  EXPECT_EQ(b[".attn.qkv.weight"], (Shape{48, 16}));
  EXPECT_EQ(one.attention.feature_dim(), 8);
  EXPECT_EQ(two.attention.feature_dim(), 16);
  EXPECT_EQ(one.attention.kind, AttentionKind::kSpace);
  EXPECT_EQ(two.attention.kind, AttentionKind::kChannel);
}

TEST(SchBlock, AblationReplacesChannelStage) {
  Rng rng(17);
  SchBlock<float> full(16, 4, 2, 2, true, rng);
  SchBlock<float> ablated(16, 4, 2, 2, false, rng);
  EXPECT_EQ(full.first.kind, SchStageKind::kSpace);
  EXPECT_EQ(full.second.kind, SchStageKind::kChannel);
  EXPECT_EQ(ablated.second.kind, SchStageKind::kSpace);
  NoGradGuard guard;
  Var<float> x(Tensor<float>({1, 16, 8, 8}, 0.25f));
  EXPECT_EQ(full.Forward(x).shape(), x.shape());
  EXPECT_EQ(ablated.Forward(x).shape(), x.shape());
}

}  // namespace
}  // namespace sch
