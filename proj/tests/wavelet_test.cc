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

#include "sch/errors.h"
#include "sch/wavelet.h"
#include "test_util.h"

namespace sch {
namespace {

using testing::RandomTensor;

TEST(Wavelet, TwoByTwoExample) {
  Tensor<double> x({1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  WaveletCoeffs<double> c = Dwt2(x);
  EXPECT_EQ(c.data.shape(), (Shape{4, 1, 1}));
  EXPECT_EQ(c.data.storage(), (AlignedVector<double>{5, 1, 2, 0}));
  EXPECT_EQ(Idwt2(c).storage(), x.storage());
}

TEST(Wavelet, ConstantImage) {
  const double v = 0.7;
  Tensor<double> x({2, 4, 6}, v);
  WaveletCoeffs<double> c = Dwt2(x);
  for (int64_t ch = 0; ch < 8; ++ch) {
    for (int64_t i = 0; i < 6; ++i) {
      EXPECT_NEAR(c.data[ch * 6 + i], ch < 2 ? 2 * v : 0.0, 1e-15);
    }
  }
  Tensor<double> back = Idwt2(c);
  for (double r : back.values()) EXPECT_NEAR(r, v, 1e-15);
}

TEST(Wavelet, ShapeAndChannelGrouping) {
  Rng rng(1);
  Tensor<float> x = RandomTensor<float>({3, 256, 256}, rng);
  WaveletCoeffs<float> c = Dwt2(x);
  EXPECT_EQ(c.data.shape(), (Shape{12, 128, 128}));
  // LL block holds all input channels first: LL = 2 x 2x2 average pool.
  for (int ch = 0; ch < 3; ++ch) {
    const float avg = (x.at(ch, 10, 20) + x.at(ch, 10, 21) + x.at(ch, 11, 20) +
                       x.at(ch, 11, 21)) / 4;
    EXPECT_NEAR(c.data.at(ch, 5, 10), 2 * avg, 1e-6);
  }
}

TEST(Wavelet, OddSizesAreRejected) {
  EXPECT_THROW(Dwt2(Tensor<float>({1, 3, 4})), DimensionError);
  WaveletCoeffs<float> bad{Tensor<float>({6, 2, 2}), {}, WaveletScaling::kOrthonormal};
  EXPECT_THROW(Idwt2(bad), DimensionError);
}

TEST(Wavelet, DoublePrecisionReconstruction) {
  Rng rng(2);
  Tensor<double> x = RandomTensor<double>({2, 10, 14}, rng);
  Tensor<double> r = Idwt2(Dwt2(x));
  for (int64_t i = 0; i < x.numel(); ++i) EXPECT_NEAR(r[i], x[i], 1e-12);
}

TEST(Wavelet, Linearity) {
  Rng rng(3);
  Tensor<double> a = RandomTensor<double>({1, 8, 8}, rng);
  Tensor<double> b = RandomTensor<double>({1, 8, 8}, rng);
  Tensor<double> mix({1, 8, 8});
  for (int64_t i = 0; i < mix.numel(); ++i) mix[i] = 2 * a[i] - 3 * b[i];
  Tensor<double> da = Dwt2(a).data, db = Dwt2(b).data, dm = Dwt2(mix).data;
  for (int64_t i = 0; i < dm.numel(); ++i) {
    EXPECT_NEAR(dm[i], 2 * da[i] - 3 * db[i], 1e-12);
  }
}

TEST(Wavelet, UnnormalizedVariantRoundTrips) {
  Rng rng(4);
  Tensor<double> x = RandomTensor<double>({1, 4, 4}, rng);
  WaveletCoeffs<double> c = Dwt2(x, WaveletScaling::kUnnormalized);
  EXPECT_NEAR(c.data[0], x[0] + x[1] + x[4] + x[5], 1e-12);
  Tensor<double> r = Idwt2(c);
  for (int64_t i = 0; i < x.numel(); ++i) EXPECT_NEAR(r[i], x[i], 1e-12);
}

TEST(Wavelet, BatchedOpsMatchSingleImageOps) {
  Rng rng(5);
  Tensor<double> x = RandomTensor<double>({2, 3, 6, 8}, rng);
  Var<double> y = HaarDwt(Var<double>(x));
  for (int64_t b = 0; b < 2; ++b) {
    Tensor<double> one({3, 6, 8});
    std::copy_n(x.data() + b * one.numel(), one.numel(), one.data());
    Tensor<double> ref = Dwt2(one).data;
    for (int64_t i = 0; i < ref.numel(); ++i) {
      EXPECT_NEAR(y.value()[b * ref.numel() + i], ref[i], 1e-14);
    }
  }
  Var<double> back = HaarIdwt(y);
  for (int64_t i = 0; i < x.numel(); ++i) EXPECT_NEAR(back.value()[i], x[i], 1e-12);
}

TEST(Wavelet, GradientsMatchFiniteDifferences) {
  Rng rng(6);
  for (auto s : {WaveletScaling::kOrthonormal, WaveletScaling::kUnnormalized}) {
    Var<double> x = testing::RandomVar<double>({1, 2, 4, 6}, rng);
    Var<double> c = testing::RandomVar<double>({1, 8, 2, 3}, rng);
    testing::Projector p(1), q(2);
    EXPECT_LE(testing::GradCheck([&] { return p(HaarDwt(x, s)); }, {{"x", x}}, 48)
                  .max_relative_error, 1e-4);
    EXPECT_LE(testing::GradCheck([&] { return q(HaarIdwt(c, s)); }, {{"c", c}}, 48)
                  .max_relative_error, 1e-4);
  }
}

}  // namespace
}  // namespace sch
