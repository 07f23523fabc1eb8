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

#ifndef SCH_ATTENTION_H_
#define SCH_ATTENTION_H_

#include <cstdint>
#include <string>
#include <vector>

#include "sch/layers.h"

namespace sch {

enum class AttentionKind {
  kSpace,    // attention across the spatial tokens of a window
  kChannel,  // attention across the channel tokens of a window
};

// Non-overlapping window tokens of a [B, C, H, W] map.
// data: [B * n, L, C] with n = (H / ws) * (W / ws) windows per image and
// L = ws * ws tokens per window, windows in raster order.
template <typename T>
struct WindowedTokens {
  Var<T> data;
  int64_t batch = 0;
  int64_t height = 0;
  int64_t width = 0;
  int64_t window_size = 0;

  int64_t windows_per_image() const {
    return (height / window_size) * (width / window_size);
  }
  int64_t tokens_per_window() const { return window_size * window_size; }
  int64_t channels() const { return data.dim(2); }
};

template <typename T>
WindowedTokens<T> WindowPartition(const Var<T>& x, int64_t window_size);
template <typename T>
Var<T> WindowReverse(const WindowedTokens<T>& tokens);

// Convolutional positional encoding x + depthwise(x).
// Image form: x [B, C, H, W], kernel [C, k, k].
template <typename T>
Var<T> Cpe(const Var<T>& x, const Var<T>& kernel);
// Token form: u [G, S, D], kernel [D, k] slid along the S tokens.
template <typename T>
Var<T> CpeTokens(const Var<T>& u, const Var<T>& kernel);

// Softmax attention maps recorded during a forward pass, one entry per
// attention core call, each [G * heads, S, S] with S the token count.
template <typename T>
struct AttentionTrace {
  std::vector<Tensor<T>> maps;
  int64_t heads = 0;
};

// Parameters of one windowed attention module (Transformer sub-block with
// CPE, pre-norm attention and pre-norm MLP).
//
// Space attention works on [*, L, C] tokens: features are the C channels and
// heads split C. Channel attention works on the transposed [*, C, L] tokens:
// features are the L = ws^2 window positions, so every projection, norm, CPE
// and MLP has the fixed width L regardless of the channel count, heads split
// L, and each head yields a full C x C map per window.
template <typename T>
struct AttentionParams {
  AttentionKind kind = AttentionKind::kSpace;
  int64_t channels = 0;
  int64_t window_size = 0;
  int64_t heads = 1;
  int64_t mlp_ratio = 2;
  // Logit scale; 0 selects 1 / sqrt(head_dim).
  double logit_scale = 0;

  Var<T> cpe0;  // [C, 3, 3] (space) or [L, 3] (channel)
  Var<T> cpe1;
  LayerNormLayer<T> norm1;
  LinearLayer<T> qkv;
  LinearLayer<T> proj;
  LayerNormLayer<T> norm2;
  LinearLayer<T> fc1;
  LinearLayer<T> fc2;

  AttentionParams() = default;
  AttentionParams(AttentionKind kind, int64_t channels, int64_t window_size,
                  int64_t heads, int64_t mlp_ratio, Rng& rng);

  int64_t feature_dim() const {
    return kind == AttentionKind::kSpace ? channels : window_size * window_size;
  }
  int64_t head_dim() const { return feature_dim() / heads; }
  double scale() const;

  void Visit(const std::string& prefix, const ParamVisitor<T>& fn);
  // Zeroes the CPE kernels and the attention/MLP output projections, turning
  // the module into the identity map.
  void ZeroResidualBranches();
};

// Per-window multi-head self-attention over spatial tokens (no norm or
// residual). Windows never interact.
template <typename T>
WindowedTokens<T> SpaceAttentionCore(const WindowedTokens<T>& tokens,
                                     const AttentionParams<T>& p,
                                     AttentionTrace<T>* trace = nullptr);

// Per-window multi-head self-attention over channel tokens (no norm or
// residual): transpose to [*, C, L], attend, transpose back.
template <typename T>
WindowedTokens<T> ChannelAttentionCore(const WindowedTokens<T>& tokens,
                                       const AttentionParams<T>& p,
                                       AttentionTrace<T>* trace = nullptr);

// Full module on [B, C, H, W]:
//   x' = CPE0(x) + Attn(LN(CPE0(x)));  out = CPE1(x') + MLP(LN(CPE1(x')))
// with window partition/reverse placed so that channel attention sees the
// transposed layout for all of its sub-layers.
template <typename T>
Var<T> AttentionBlock(const Var<T>& x, const AttentionParams<T>& p,
                      AttentionTrace<T>* trace = nullptr);

}  // namespace sch

#endif  // SCH_ATTENTION_H_
