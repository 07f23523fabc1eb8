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

#ifndef SCH_OPS_H_
#define SCH_OPS_H_

#include <cstdint>
#include <vector>

#include "sch/autograd.h"

namespace sch {

// Differentiable primitives. All ops are defined for float and double.
// Layout conventions: images are [B, C, H, W]; token sets are [G, S, D]
// (G independent groups, S tokens, D features).

// Elementwise arithmetic on equal shapes.
template <typename T> Var<T> Add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> Sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> Mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> Scale(const Var<T>& a, T s);
template <typename T> Var<T> AddScalar(const Var<T>& a, T s);

// Nonlinearities.
template <typename T> Var<T> LeakyRelu(const Var<T>& x, T negative_slope);
template <typename T> Var<T> Gelu(const Var<T>& x);  // tanh approximation
template <typename T> Var<T> Tanh(const Var<T>& x);
template <typename T> Var<T> Exp(const Var<T>& x);
template <typename T> Var<T> Sigmoid(const Var<T>& x);
template <typename T> Var<T> Softplus(const Var<T>& x);

// Clamps to [lo, hi]. Outside the range the gradient still flows when it
// points back into the range, so clamped units can recover.
template <typename T> Var<T> ClampBounded(const Var<T>& x, T lo, T hi);

// Rounds half away from zero; the backward pass is the identity.
template <typename T> Var<T> RoundSte(const Var<T>& x);

// Reductions to a single-element tensor of shape [1].
template <typename T> Var<T> Sum(const Var<T>& x);
template <typename T> Var<T> Mean(const Var<T>& x);

// Layout.
template <typename T> Var<T> Reshape(const Var<T>& x, Shape shape);
// out.shape[i] = x.shape[perm[i]].
template <typename T>
Var<T> Permute(const Var<T>& x, const std::vector<int>& perm);
template <typename T>
Var<T> Concat(const std::vector<Var<T>>& xs, int axis);
template <typename T>
Var<T> Slice(const Var<T>& x, int axis, int64_t begin, int64_t end);
// [..., 1] -> [..., n] by repetition.
template <typename T> Var<T> RepeatLast(const Var<T>& x, int64_t n);

// Convolutions on [B, C, H, W].
// w: [Co, Ci, k, k]; b: [Co] or empty. Zero padding.
template <typename T>
Var<T> Conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride,
              int pad);
// Per-channel kernels w: [C, k, k], "same" zero padding, no bias.
template <typename T>
Var<T> DepthwiseConv2d(const Var<T>& x, const Var<T>& w);
// Token sets [G, S, D]: per-feature kernel w: [D, k] slid along S with
// "same" zero padding.
template <typename T>
Var<T> DepthwiseConvTokens(const Var<T>& x, const Var<T>& w);
// Depth-to-space: [B, C*r*r, H, W] -> [B, C, H*r, W*r].
template <typename T> Var<T> PixelShuffle(const Var<T>& x, int r);
// Space-to-depth, the inverse of PixelShuffle.
template <typename T> Var<T> PixelUnshuffle(const Var<T>& x, int r);

// Dense layers on the last axis: x [..., in], w [out, in], b [out] or empty.
template <typename T>
Var<T> Linear(const Var<T>& x, const Var<T>& w, const Var<T>& b);
// Batched product a [G, m, k] x b [G, k, n]; with transpose_b, b is
// [G, n, k].
template <typename T>
Var<T> MatMul(const Var<T>& a, const Var<T>& b, bool transpose_b = false);
template <typename T> Var<T> Softmax(const Var<T>& x);  // last axis
template <typename T>
Var<T> LayerNorm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                 T eps = T(1e-5));

// Bits of a unit-width bin centred at `v` under N(0, sigma^2):
//   -log2(Phi((v + 0.5) / sigma) - Phi((v - 0.5) / sigma))
// with the likelihood floored at `floor`.
template <typename T>
Var<T> GaussianBits(const Var<T>& v, const Var<T>& sigma, double floor);
// Bits of a bin whose CDF logits at its edges are `lower` and `upper`
// (logistic link), with the likelihood floored at `floor`.
template <typename T>
Var<T> LogisticBinBits(const Var<T>& lower, const Var<T>& upper,
                       double floor);

// Standard normal CDF in double precision.
double NormalCdf(double x);

}  // namespace sch

#endif  // SCH_OPS_H_
