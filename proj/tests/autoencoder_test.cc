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

#include <cmath>

#include "sch/autoencoder.h"
#include "sch/errors.h"
#include "sch/model.h"
#include "test_util.h"

namespace sch {
namespace {

// Full latent width on a narrow trunk keeps the shape checks cheap.
ModelConfig WideLatent() {
  ModelConfig c;
  c.n = 32;
  c.m = 320;
  c.z_channels = 192;
  c.sch_stack = {1, 1, 1};
  c.window_size = 8;
  c.heads = 8;
  return c;
}

ModelConfig Tiny() {
  ModelConfig c = ModelConfig::Toy();
  c.n = 8;
  c.m = 8;
  c.z_channels = 4;
  c.window_size = 2;
  c.heads = 2;
  c.slices = 2;
  c.entropy_width = 4;
  return c;
}

TEST(Analysis, LatentShapes) {
  Rng rng(1);
  AnalysisTransform<float> g_a(WideLatent(), rng);
  NoGradGuard guard;
  EXPECT_EQ(g_a.Forward(Var<float>(Tensor<float>({1, 3, 256, 256}, 0.5f))).shape(),
            (Shape{1, 320, 16, 16}));
  EXPECT_EQ(g_a.Forward(Var<float>(Tensor<float>({1, 3, 512, 768}, 0.5f))).shape(),
            (Shape{1, 320, 32, 48}));
  EXPECT_THROW(g_a.Forward(Var<float>(Tensor<float>({1, 3, 256, 200}))), DimensionError);
}

TEST(Synthesis, ImageShapesAndZeroLatent) {
  Rng rng(2);
  SynthesisTransform<float> g_s(WideLatent(), rng);
  NoGradGuard guard;
  Var<float> x = g_s.Forward(Var<float>(Tensor<float>({1, 320, 16, 16}, 0.0f)));
  EXPECT_EQ(x.shape(), (Shape{1, 3, 256, 256}));
  for (float v : x.value().values()) {
    ASSERT_TRUE(std::isfinite(v));
    EXPECT_LT(std::abs(v), 1e3f);
  }
}

TEST(Autoencoder, RoundTripShapeAndDeterminism) {
  ModelConfig c = ModelConfig::Toy();
  Rng rng(3);
  AnalysisTransform<float> g_a(c, rng);
  SynthesisTransform<float> g_s(c, rng);
  Rng data(4);
  Var<float> x(testing::RandomTensor<float>({2, 3, 64, 128}, data, 0.0, 1.0));
  NoGradGuard guard;
  Var<float> y1 = g_a.Forward(x), y2 = g_a.Forward(x);
  EXPECT_EQ(y1.value().storage(), y2.value().storage());
  EXPECT_EQ(y1.shape(), (Shape{2, c.m, 4, 8}));
  EXPECT_EQ(g_s.Forward(y1).shape(), x.shape());
}

TEST(Autoencoder, StackDepthsFollowConfig) {
  ModelConfig c = Tiny();
  c.sch_stack = {2, 3, 1};
  Rng rng(5);
  AnalysisTransform<double> g_a(c, rng);
  SynthesisTransform<double> g_s(c, rng);
  EXPECT_EQ(g_a.num_blocks(), 6);
  EXPECT_EQ(g_a.stacks[1].size(), 3u);
  // The decoder mirrors the encoder: its first stage runs on the latent width.
  EXPECT_EQ(g_s.stacks[0].size(), 1u);
  EXPECT_EQ(g_s.stacks[2].size(), 2u);
  EXPECT_EQ(g_s.stacks[0][0].first.channels(), c.m);
  EXPECT_EQ(g_a.stacks[2][0].first.channels(), c.m);
}

TEST(Autoencoder, StemProbeCapturesFirstConvolution) {
  ModelConfig c = Tiny();
  Rng rng(6);
  AnalysisTransform<double> g_a(c, rng);
  AnalysisProbe<double> probe;
  Var<double> x(testing::RandomTensor<double>({1, 3, 32, 32}, rng, 0.0, 1.0));
  g_a.Forward(x, &probe);
  EXPECT_EQ(probe.stem_conv.shape(), (Shape{1, c.n, 16, 16}));
  EXPECT_EQ(probe.last_channel.attention.shape(), (Shape{1, c.m / 2, 2, 2}));
  EXPECT_EQ(probe.last_space.residual.shape(), (Shape{1, c.m / 2, 2, 2}));
}

TEST(Autoencoder, EveryParameterReceivesFiniteGradient) {
  ModelConfig c = Tiny();
  CompressionModel<double> model(c, 7);
  // Push z away from zero so the rounded hyper-latent is not all zeros
  // (a zero input would legitimately give the first h_s layer no gradient).
  for (double& b : model.entropy.h_a.conv3.bias.mutable_value().values()) b += 1.7;
  Rng rng(8);
  Var<double> x(testing::RandomTensor<double>({1, 3, 64, 64}, rng, 0.0, 1.0));
  ModelOutput<double> out = model.Forward(x, QuantMode::kNoise, &rng);
  Var<double> d = Sub(out.x_hat, x);
  Var<double> mse = Mean(Mul(d, d));
  Var<double> loss = Add(Scale(Add(out.y_bits, out.z_bits), 1.0 / 4096),
                         Scale(mse, 0.013 * 255 * 255));
  loss.Backward();
  int dead = 0;
  model.Visit([&](const std::string& name, Var<double>& p) {
    double norm = 0;
    for (double g : p.grad().values()) {
      ASSERT_TRUE(std::isfinite(g)) << name;
      norm += std::abs(g);
    }
    if (norm == 0.0) {
      ++dead;
      ADD_FAILURE() << "no gradient reaches " << name;
    }
  });
  EXPECT_EQ(dead, 0);
}

}  // namespace
}  // namespace sch
