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

#include "sch/wavelet.h"

#include <string>

namespace sch {
namespace {

// out = f * F x, x: [B, C, H, W] -> out: [B, 4C, H/2, W/2].
template <typename T>
void Analyze(const T* x, int64_t batch, int64_t c, int64_t h, int64_t w, T f,
             T* out) {
  const int64_t oh = h / 2, ow = w / 2, plane = oh * ow;
  for (int64_t b = 0; b < batch; ++b) {
    for (int64_t ch = 0; ch < c; ++ch) {
      const T* src = x + (b * c + ch) * h * w;
      T* ll = out + ((b * 4 + 0) * c + ch) * plane;
      T* hl = out + ((b * 4 + 1) * c + ch) * plane;
      T* lh = out + ((b * 4 + 2) * c + ch) * plane;
      T* hh = out + ((b * 4 + 3) * c + ch) * plane;
      for (int64_t y = 0; y < oh; ++y) {
        for (int64_t xx = 0; xx < ow; ++xx) {
          const T p00 = src[(2 * y) * w + 2 * xx];
          const T p01 = src[(2 * y) * w + 2 * xx + 1];
          const T p10 = src[(2 * y + 1) * w + 2 * xx];
          const T p11 = src[(2 * y + 1) * w + 2 * xx + 1];
          const int64_t o = y * ow + xx;
          ll[o] = f * (p00 + p01 + p10 + p11);
          hl[o] = f * (-p00 + p01 - p10 + p11);
          lh[o] = f * (-p00 - p01 + p10 + p11);
          hh[o] = f * (p00 - p01 - p10 + p11);
        }
      }
    }
  }
}

// out = f * F^T coeffs, coeffs: [B, 4C, h, w] -> out: [B, C, 2h, 2w].
// Accumulates into out.
template <typename T>
void Synthesize(const T* coeffs, int64_t batch, int64_t c, int64_t h,
                int64_t w, T f, T* out) {
  const int64_t plane = h * w, ow = 2 * w;
  for (int64_t b = 0; b < batch; ++b) {
    for (int64_t ch = 0; ch < c; ++ch) {
      const T* ll = coeffs + ((b * 4 + 0) * c + ch) * plane;
      const T* hl = coeffs + ((b * 4 + 1) * c + ch) * plane;
      const T* lh = coeffs + ((b * 4 + 2) * c + ch) * plane;
      const T* hh = coeffs + ((b * 4 + 3) * c + ch) * plane;
      T* dst = out + (b * c + ch) * 4 * plane;
      for (int64_t y = 0; y < h; ++y) {
        for (int64_t xx = 0; xx < w; ++xx) {
          const int64_t i = y * w + xx;
          dst[(2 * y) * ow + 2 * xx] += f * (ll[i] - hl[i] - lh[i] + hh[i]);
          dst[(2 * y) * ow + 2 * xx + 1] += f * (ll[i] + hl[i] - lh[i] - hh[i]);
          dst[(2 * y + 1) * ow + 2 * xx] += f * (ll[i] - hl[i] + lh[i] - hh[i]);
          dst[(2 * y + 1) * ow + 2 * xx + 1] +=
              f * (ll[i] + hl[i] + lh[i] + hh[i]);
        }
      }
    }
  }
}

void CheckEven(const Shape& s, int first_spatial) {
  if (s[first_spatial] % 2 != 0 || s[first_spatial + 1] % 2 != 0) {
    throw DimensionError("Haar DWT needs even spatial dimensions, got " +
                         ShapeString(s));
  }
}

}  // namespace

double WaveletFactor(WaveletScaling scaling) {
  return scaling == WaveletScaling::kOrthonormal ? 0.5 : 1.0;
}

template <typename T>
WaveletCoeffs<T> Dwt2(const Tensor<T>& image, WaveletScaling scaling) {
  if (image.rank() != 3) {
    throw DimensionError("Dwt2 expects [C, H, W], got " +
                         ShapeString(image.shape()));
  }
  CheckEven(image.shape(), 1);
  const int64_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  WaveletCoeffs<T> out;
  out.data = Tensor<T>({4 * c, h / 2, w / 2});
  out.source_shape = image.shape();
  out.scaling = scaling;
  Analyze(image.data(), 1, c, h, w, static_cast<T>(WaveletFactor(scaling)),
          out.data.data());
  return out;
}

template <typename T>
Tensor<T> Idwt2(const WaveletCoeffs<T>& coeffs) {
  const Tensor<T>& d = coeffs.data;
  if (d.rank() != 3 || d.dim(0) % 4 != 0) {
    throw DimensionError("Idwt2 needs a channel count divisible by 4, got " +
                         ShapeString(d.shape()));
  }
  const int64_t c = d.dim(0) / 4, h = d.dim(1), w = d.dim(2);
  Tensor<T> out({c, 2 * h, 2 * w});
  const double a = WaveletFactor(coeffs.scaling);
  Synthesize(d.data(), 1, c, h, w, static_cast<T>(1.0 / (4.0 * a)), out.data());
  return out;
}

template <typename T>
Var<T> HaarDwt(const Var<T>& x, WaveletScaling scaling) {
  if (x.value().rank() != 4) {
    throw DimensionError("HaarDwt expects [B, C, H, W], got " +
                         ShapeString(x.shape()));
  }
  CheckEven(x.shape(), 2);
  const int64_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const T f = static_cast<T>(WaveletFactor(scaling));
  Tensor<T> out({b, 4 * c, h / 2, w / 2});
  Analyze(x.value().data(), b, c, h, w, f, out.data());
  return MakeResult<T>(std::move(out), {x}, [=](Node<T>& node) {
    Node<T>& in = *node.inputs[0];
    if (!in.requires_grad) return;
    Synthesize(node.grad.data(), b, c, h / 2, w / 2, f, in.Grad().data());
  });
}

template <typename T>
Var<T> HaarIdwt(const Var<T>& coeffs, WaveletScaling scaling) {
  if (coeffs.value().rank() != 4 || coeffs.dim(1) % 4 != 0) {
    throw DimensionError("HaarIdwt needs a channel count divisible by 4, got " +
                         ShapeString(coeffs.shape()));
  }
  const int64_t b = coeffs.dim(0), c = coeffs.dim(1) / 4, h = coeffs.dim(2),
                w = coeffs.dim(3);
  const T f = static_cast<T>(1.0 / (4.0 * WaveletFactor(scaling)));
  Tensor<T> out({b, c, 2 * h, 2 * w});
  Synthesize(coeffs.value().data(), b, c, h, w, f, out.data());
  return MakeResult<T>(std::move(out), {coeffs}, [=](Node<T>& node) {
    Node<T>& in = *node.inputs[0];
    if (!in.requires_grad) return;
    Tensor<T> g({b, 4 * c, h, w});
    Analyze(node.grad.data(), b, c, 2 * h, 2 * w, f, g.data());
    T* gi = in.Grad().data();
    for (int64_t i = 0; i < g.numel(); ++i) gi[i] += g[i];
  });
}

template struct WaveletCoeffs<float>;
template struct WaveletCoeffs<double>;
template WaveletCoeffs<float> Dwt2(const Tensor<float>&, WaveletScaling);
template WaveletCoeffs<double> Dwt2(const Tensor<double>&, WaveletScaling);
template Tensor<float> Idwt2(const WaveletCoeffs<float>&);
template Tensor<double> Idwt2(const WaveletCoeffs<double>&);
template Var<float> HaarDwt(const Var<float>&, WaveletScaling);
template Var<double> HaarDwt(const Var<double>&, WaveletScaling);
template Var<float> HaarIdwt(const Var<float>&, WaveletScaling);
template Var<double> HaarIdwt(const Var<double>&, WaveletScaling);

}  // namespace sch
