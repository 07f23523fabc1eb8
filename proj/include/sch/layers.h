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

#ifndef SCH_LAYERS_H_
#define SCH_LAYERS_H_

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>

#include "sch/ops.h"

namespace sch {

using Rng = std::mt19937_64;

template <typename T>
using ParamVisitor = std::function<void(const std::string& name, Var<T>&)>;

template <typename T>
Var<T> UniformParam(Shape shape, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor<T> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
  return Var<T>(std::move(t), true);
}

template <typename T>
Var<T> ConstantParam(Shape shape, T value) {
  return Var<T>(Tensor<T>(std::move(shape), value), true);
}

// k x k convolution with bias, PyTorch-style uniform(1/sqrt(fan_in)) init.
template <typename T>
struct ConvLayer {
  Var<T> weight;
  Var<T> bias;
  int stride = 1;
  int pad = 0;

  ConvLayer() = default;
  ConvLayer(int64_t in, int64_t out, int kernel, int stride_, Rng& rng)
      : stride(stride_), pad(kernel / 2) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in * kernel * kernel));
    weight = UniformParam<T>({out, in, kernel, kernel}, bound, rng);
    bias = UniformParam<T>({out}, bound, rng);
  }

  Var<T> operator()(const Var<T>& x) const {
    return Conv2d(x, weight, bias, stride, pad);
  }
  void Visit(const std::string& prefix, const ParamVisitor<T>& fn) {
    fn(prefix + ".weight", weight);
    fn(prefix + ".bias", bias);
  }
  void Zero() {
    weight.mutable_value().Fill(T(0));
    bias.mutable_value().Fill(T(0));
  }
};

// Sub-pixel convolution: k x k conv to out*r^2 channels, then depth-to-space.
template <typename T>
struct SubpelConvLayer {
  ConvLayer<T> conv;
  int factor = 2;

  SubpelConvLayer() = default;
  SubpelConvLayer(int64_t in, int64_t out, int factor_, Rng& rng)
      : conv(in, out * factor_ * factor_, 3, 1, rng), factor(factor_) {}

  Var<T> operator()(const Var<T>& x) const {
    return PixelShuffle(conv(x), factor);
  }
  void Visit(const std::string& prefix, const ParamVisitor<T>& fn) {
    conv.Visit(prefix, fn);
  }
  void Zero() { conv.Zero(); }
};

template <typename T>
struct LinearLayer {
  Var<T> weight;  // [out, in]
  Var<T> bias;    // [out]

  LinearLayer() = default;
  LinearLayer(int64_t in, int64_t out, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    weight = UniformParam<T>({out, in}, bound, rng);
    bias = UniformParam<T>({out}, bound, rng);
  }

  Var<T> operator()(const Var<T>& x) const { return Linear(x, weight, bias); }
  void Visit(const std::string& prefix, const ParamVisitor<T>& fn) {
    fn(prefix + ".weight", weight);
    fn(prefix + ".bias", bias);
  }
  void Zero() {
    weight.mutable_value().Fill(T(0));
    bias.mutable_value().Fill(T(0));
  }
};

template <typename T>
struct LayerNormLayer {
  Var<T> gamma;
  Var<T> beta;

  LayerNormLayer() = default;
  explicit LayerNormLayer(int64_t features)
      : gamma(ConstantParam<T>({features}, T(1))),
        beta(ConstantParam<T>({features}, T(0))) {}

  Var<T> operator()(const Var<T>& x) const { return LayerNorm(x, gamma, beta); }
  void Visit(const std::string& prefix, const ParamVisitor<T>& fn) {
    fn(prefix + ".gamma", gamma);
    fn(prefix + ".beta", beta);
  }
};

inline constexpr double kLeakySlope = 0.01;

template <typename T>
Var<T> Lrelu(const Var<T>& x) {
  return LeakyRelu(x, static_cast<T>(kLeakySlope));
}

}  // namespace sch

#endif  // SCH_LAYERS_H_
