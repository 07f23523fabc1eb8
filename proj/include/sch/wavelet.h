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

#ifndef SCH_WAVELET_H_
#define SCH_WAVELET_H_

#include "sch/autograd.h"
#include "sch/tensor.h"

namespace sch {

// Haar analysis filters on each 2x2 block [[a, b], [c, d]]:
//   LL =  a + b + c + d     HL = -a + b - c + d
//   LH = -a - b + c + d     HH =  a - b - c + d
// multiplied by the scaling factor. Sub-bands are stacked along channels as
// [LL(all C), HL(all C), LH(all C), HH(all C)].
enum class WaveletScaling {
  kOrthonormal,   // factor 1/2: energy preserving, self-adjoint inverse
  kUnnormalized,  // factor 1: raw +-1 filters
};

double WaveletFactor(WaveletScaling scaling);

template <typename T>
struct WaveletCoeffs {
  Tensor<T> data;  // [4C, H/2, W/2]
  Shape source_shape;  // (C, H, W)
  WaveletScaling scaling = WaveletScaling::kOrthonormal;
};

// Single image [C, H, W] with even H and W.
template <typename T>
WaveletCoeffs<T> Dwt2(const Tensor<T>& image,
                      WaveletScaling scaling = WaveletScaling::kOrthonormal);
template <typename T>
Tensor<T> Idwt2(const WaveletCoeffs<T>& coeffs);

// Differentiable batched forms: [B, C, H, W] <-> [B, 4C, H/2, W/2].
template <typename T>
Var<T> HaarDwt(const Var<T>& x,
               WaveletScaling scaling = WaveletScaling::kOrthonormal);
template <typename T>
Var<T> HaarIdwt(const Var<T>& coeffs,
                WaveletScaling scaling = WaveletScaling::kOrthonormal);

}  // namespace sch

#endif  // SCH_WAVELET_H_
