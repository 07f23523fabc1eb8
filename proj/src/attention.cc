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

#include "sch/attention.h"

#include <cmath>

namespace sch {
namespace {

// Multi-head self-attention of tokens [G, S, D] along S, heads split D.
template <typename T>
Var<T> MultiHeadAttention(const Var<T>& tokens, const AttentionParams<T>& p,
                          AttentionTrace<T>* trace) {
  const int64_t groups = tokens.dim(0), seq = tokens.dim(1),
                feat = tokens.dim(2), heads = p.heads, hd = feat / heads;
  Var<T> qkv = p.qkv(tokens);  // [G, S, 3D]
  qkv = Reshape(qkv, {groups, seq, 3, heads, hd});
  qkv = Permute(qkv, {2, 0, 3, 1, 4});  // [3, G, H, S, hd]
  const Shape head_shape{groups * heads, seq, hd};
  Var<T> q = Reshape(Slice(qkv, 0, 0, 1), head_shape);
  Var<T> k = Reshape(Slice(qkv, 0, 1, 2), head_shape);
  Var<T> v = Reshape(Slice(qkv, 0, 2, 3), head_shape);
  Var<T> logits = Scale(MatMul(q, k, /*transpose_b=*/true),
                        static_cast<T>(p.scale()));
  Var<T> attn = Softmax(logits);  // [G*H, S, S]
  if (trace) {
    trace->maps.push_back(attn.value());
    trace->heads = heads;
  }
  Var<T> out = MatMul(attn, v);  // [G*H, S, hd]
  out = Reshape(out, {groups, heads, seq, hd});
  out = Permute(out, {0, 2, 1, 3});
  out = Reshape(out, {groups, seq, feat});
  return p.proj(out);
}

template <typename T>
Var<T> Mlp(const Var<T>& tokens, const AttentionParams<T>& p) {
  return p.fc2(Gelu(p.fc1(tokens)));
}

template <typename T>
Var<T> TransposeTokens(const Var<T>& x) {
  return Permute(x, {0, 2, 1});
}

}  // namespace

template <typename T>
WindowedTokens<T> WindowPartition(const Var<T>& x, int64_t ws) {
  if (x.value().rank() != 4) {
    throw DimensionError("WindowPartition expects [B, C, H, W], got " +
                         ShapeString(x.shape()));
  }
  const int64_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (ws <= 0 || h % ws != 0 || w % ws != 0) {
    throw DimensionError("spatial dims " + ShapeString(x.shape()) +
                         " not divisible by window size " + std::to_string(ws));
  }
  const int64_t nh = h / ws, nw = w / ws;
  Var<T> t = Reshape(x, {b, c, nh, ws, nw, ws});
  t = Permute(t, {0, 2, 4, 3, 5, 1});
  WindowedTokens<T> out;
  out.data = Reshape(t, {b * nh * nw, ws * ws, c});
  out.batch = b;
  out.height = h;
  out.width = w;
  out.window_size = ws;
  return out;
}

template <typename T>
Var<T> WindowReverse(const WindowedTokens<T>& tokens) {
  const int64_t ws = tokens.window_size;
  if (ws <= 0 || tokens.height % ws != 0 || tokens.width % ws != 0 ||
      tokens.data.value().rank() != 3 ||
      tokens.data.dim(0) != tokens.batch * tokens.windows_per_image() ||
      tokens.data.dim(1) != ws * ws) {
    throw DimensionError("window tokens " + ShapeString(tokens.data.shape()) +
                         " inconsistent with grid " +
                         std::to_string(tokens.height) + "x" +
                         std::to_string(tokens.width) + " / " +
                         std::to_string(ws));
  }
  const int64_t b = tokens.batch, c = tokens.data.dim(2),
                nh = tokens.height / ws, nw = tokens.width / ws;
  Var<T> t = Reshape(tokens.data, {b, nh, nw, ws, ws, c});
  t = Permute(t, {0, 5, 1, 3, 2, 4});
  return Reshape(t, {b, c, tokens.height, tokens.width});
}

template <typename T>
Var<T> Cpe(const Var<T>& x, const Var<T>& kernel) {
  return Add(x, DepthwiseConv2d(x, kernel));
}

template <typename T>
Var<T> CpeTokens(const Var<T>& u, const Var<T>& kernel) {
  return Add(u, DepthwiseConvTokens(u, kernel));
}

template <typename T>
AttentionParams<T>::AttentionParams(AttentionKind kind_, int64_t channels_,
                                    int64_t window_size_, int64_t heads_,
                                    int64_t mlp_ratio_, Rng& rng)
    : kind(kind_),
      channels(channels_),
      window_size(window_size_),
      heads(heads_),
      mlp_ratio(mlp_ratio_) {
  const int64_t d = feature_dim();
  if (heads <= 0 || d % heads != 0) {
    throw ConfigError(std::string(kind == AttentionKind::kSpace ? "space"
                                                                : "channel") +
                      " attention: " + std::to_string(heads) +
                      " heads do not divide feature width " + std::to_string(d));
  }
  if (kind == AttentionKind::kSpace) {
    cpe0 = ConstantParam<T>({channels, 3, 3}, T(0));
    cpe1 = ConstantParam<T>({channels, 3, 3}, T(0));
  } else {
    cpe0 = ConstantParam<T>({d, 3}, T(0));
    cpe1 = ConstantParam<T>({d, 3}, T(0));
  }
  norm1 = LayerNormLayer<T>(d);
  qkv = LinearLayer<T>(d, 3 * d, rng);
  proj = LinearLayer<T>(d, d, rng);
  norm2 = LayerNormLayer<T>(d);
  fc1 = LinearLayer<T>(d, mlp_ratio * d, rng);
  fc2 = LinearLayer<T>(mlp_ratio * d, d, rng);
}

template <typename T>
double AttentionParams<T>::scale() const {
  return logit_scale > 0 ? logit_scale
                         : 1.0 / std::sqrt(static_cast<double>(head_dim()));
}

template <typename T>
void AttentionParams<T>::Visit(const std::string& prefix,
                               const ParamVisitor<T>& fn) {
  fn(prefix + ".cpe0", cpe0);
  fn(prefix + ".cpe1", cpe1);
  norm1.Visit(prefix + ".norm1", fn);
  qkv.Visit(prefix + ".qkv", fn);
  proj.Visit(prefix + ".proj", fn);
  norm2.Visit(prefix + ".norm2", fn);
  fc1.Visit(prefix + ".fc1", fn);
  fc2.Visit(prefix + ".fc2", fn);
}

template <typename T>
void AttentionParams<T>::ZeroResidualBranches() {
  cpe0.mutable_value().Fill(T(0));
  cpe1.mutable_value().Fill(T(0));
  proj.Zero();
  fc2.Zero();
}

template <typename T>
WindowedTokens<T> SpaceAttentionCore(const WindowedTokens<T>& tokens,
                                     const AttentionParams<T>& p,
                                     AttentionTrace<T>* trace) {
  if (tokens.channels() != p.feature_dim() ||
      p.kind != AttentionKind::kSpace) {
    throw ConfigError("space attention parameters do not match tokens " +
                      ShapeString(tokens.data.shape()));
  }
  WindowedTokens<T> out = tokens;
  out.data = MultiHeadAttention(tokens.data, p, trace);
  return out;
}

template <typename T>
WindowedTokens<T> ChannelAttentionCore(const WindowedTokens<T>& tokens,
                                       const AttentionParams<T>& p,
                                       AttentionTrace<T>* trace) {
  if (tokens.data.dim(1) != p.feature_dim() ||
      p.kind != AttentionKind::kChannel) {
    throw ConfigError("channel attention parameters do not match tokens " +
                      ShapeString(tokens.data.shape()));
  }
  WindowedTokens<T> out = tokens;
  Var<T> u = TransposeTokens(tokens.data);  // [G, C, L]
  out.data = TransposeTokens(MultiHeadAttention(u, p, trace));
  return out;
}

template <typename T>
Var<T> AttentionBlock(const Var<T>& x, const AttentionParams<T>& p,
                      AttentionTrace<T>* trace) {
  if (x.value().rank() != 4 || x.dim(1) != p.channels) {
    throw DimensionError("attention block for " + std::to_string(p.channels) +
                         " channels got " + ShapeString(x.shape()));
  }
  const int64_t ws = p.window_size;
  if (p.kind == AttentionKind::kSpace) {
    Var<T> x1 = Cpe(x, p.cpe0);
    WindowedTokens<T> t = WindowPartition(x1, ws);
    t.data = Add(t.data, MultiHeadAttention(p.norm1(t.data), p, trace));
    Var<T> x2 = Cpe(WindowReverse(t), p.cpe1);
    WindowedTokens<T> t2 = WindowPartition(x2, ws);
    t2.data = Add(t2.data, Mlp(p.norm2(t2.data), p));
    return WindowReverse(t2);
  }
  WindowedTokens<T> t = WindowPartition(x, ws);
  Var<T> u = TransposeTokens(t.data);  // [G, C, L]
  u = CpeTokens(u, p.cpe0);
  u = Add(u, MultiHeadAttention(p.norm1(u), p, trace));
  u = CpeTokens(u, p.cpe1);
  u = Add(u, Mlp(p.norm2(u), p));
  t.data = TransposeTokens(u);
  return WindowReverse(t);
}

#define SCH_INSTANTIATE_ATTENTION(T)                                          \
  template struct WindowedTokens<T>;                                          \
  template struct AttentionParams<T>;                                         \
  template WindowedTokens<T> WindowPartition(const Var<T>&, int64_t);         \
  template Var<T> WindowReverse(const WindowedTokens<T>&);                    \
  template Var<T> Cpe(const Var<T>&, const Var<T>&);                          \
  template Var<T> CpeTokens(const Var<T>&, const Var<T>&);                    \
  template WindowedTokens<T> SpaceAttentionCore(                              \
      const WindowedTokens<T>&, const AttentionParams<T>&, AttentionTrace<T>*); \
  template WindowedTokens<T> ChannelAttentionCore(                            \
      const WindowedTokens<T>&, const AttentionParams<T>&, AttentionTrace<T>*); \
  template Var<T> AttentionBlock(const Var<T>&, const AttentionParams<T>&,    \
                                 AttentionTrace<T>*);

SCH_INSTANTIATE_ATTENTION(float)
SCH_INSTANTIATE_ATTENTION(double)

#undef SCH_INSTANTIATE_ATTENTION

}  // namespace sch
