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

#include "sch/blocks.h"

namespace sch {

template <typename T>
ResidualBlock<T>::ResidualBlock(int64_t in, int64_t out, Rng& rng)
    : conv1(in, out, 3, 1, rng), conv2(out, out, 3, 1, rng), project(in != out) {
  if (project) skip = ConvLayer<T>(in, out, 1, 1, rng);
}

template <typename T>
Var<T> ResidualBlock<T>::operator()(const Var<T>& x) const {
  Var<T> main = conv2(Lrelu(conv1(x)));
  return Add(project ? skip(x) : x, main);
}

template <typename T>
void ResidualBlock<T>::Visit(const std::string& prefix,
                             const ParamVisitor<T>& fn) {
  conv1.Visit(prefix + ".conv1", fn);
  conv2.Visit(prefix + ".conv2", fn);
  if (project) skip.Visit(prefix + ".skip", fn);
}

template <typename T>
ResidualBlockWithStride<T>::ResidualBlockWithStride(int64_t in, int64_t out,
                                                    Rng& rng)
    : conv1(in, out, 3, 2, rng),
      conv2(out, out, 3, 1, rng),
      skip(in, out, 1, 2, rng) {}

template <typename T>
Var<T> ResidualBlockWithStride<T>::operator()(const Var<T>& x) const {
  if (x.value().rank() != 4 || x.dim(2) % 2 != 0 || x.dim(3) % 2 != 0) {
    throw DimensionError("strided residual block needs even dims, got " +
                         ShapeString(x.shape()));
  }
  return Add(skip(x), conv2(Lrelu(conv1(x))));
}

template <typename T>
void ResidualBlockWithStride<T>::Visit(const std::string& prefix,
                                       const ParamVisitor<T>& fn) {
  conv1.Visit(prefix + ".conv1", fn);
  conv2.Visit(prefix + ".conv2", fn);
  skip.Visit(prefix + ".skip", fn);
}

template <typename T>
ResidualBlockUpsample<T>::ResidualBlockUpsample(int64_t in, int64_t out,
                                                Rng& rng)
    : subpel(in, out, 2, rng), conv(out, out, 3, 1, rng), skip(in, out, 2, rng) {}

template <typename T>
Var<T> ResidualBlockUpsample<T>::operator()(const Var<T>& x) const {
  return Add(skip(x), conv(Lrelu(subpel(x))));
}

template <typename T>
void ResidualBlockUpsample<T>::Visit(const std::string& prefix,
                                     const ParamVisitor<T>& fn) {
  subpel.Visit(prefix + ".subpel", fn);
  conv.Visit(prefix + ".conv", fn);
  skip.Visit(prefix + ".skip", fn);
}

template <typename T>
SchStage<T>::SchStage(SchStageKind kind_, int64_t channels,
                      int64_t window_size, int64_t heads, int64_t mlp_ratio,
                      Rng& rng)
    : kind(kind_) {
  if (channels % 2 != 0) {
    throw ConfigError("SCH stage needs an even channel count, got " +
                      std::to_string(channels));
  }
  const int64_t half = channels / 2;
  pre = ConvLayer<T>(channels, channels, 1, 1, rng);
  attention = AttentionParams<T>(kind == SchStageKind::kSpace
                                     ? AttentionKind::kSpace
                                     : AttentionKind::kChannel,
                                 half, window_size, heads, mlp_ratio, rng);
  residual = ResidualBlock<T>(half, half, rng);
  post = ConvLayer<T>(channels, channels, 1, 1, rng);
}

template <typename T>
Var<T> SchStage<T>::Forward(const Var<T>& x, SchStageTaps<T>* taps,
                            AttentionTrace<T>* trace) const {
  const int64_t c = channels();
  if (x.value().rank() != 4 || x.dim(1) != c) {
    throw DimensionError("SCH stage for " + std::to_string(c) +
                         " channels got " + ShapeString(x.shape()));
  }
  Var<T> h = pre(x);
  Var<T> a = AttentionBlock(Slice(h, 1, 0, c / 2), attention, trace);
  Var<T> r = residual(Slice(h, 1, c / 2, c));
  Var<T> out = Add(x, post(Concat<T>({a, r}, 1)));
  if (taps) {
    taps->attention = a;
    taps->residual = r;
    taps->output = out;
  }
  return out;
}

template <typename T>
void SchStage<T>::Visit(const std::string& prefix, const ParamVisitor<T>& fn) {
  pre.Visit(prefix + ".pre", fn);
  attention.Visit(prefix + ".attn", fn);
  residual.Visit(prefix + ".rb", fn);
  post.Visit(prefix + ".post", fn);
}

template <typename T>
SchBlock<T>::SchBlock(int64_t channels, int64_t window_size, int64_t heads,
                      int64_t mlp_ratio, bool channel_attention, Rng& rng)
    : first(SchStageKind::kSpace, channels, window_size, heads, mlp_ratio, rng),
      second(channel_attention ? SchStageKind::kChannel : SchStageKind::kSpace,
             channels, window_size, heads, mlp_ratio, rng) {}

template <typename T>
Var<T> SchBlock<T>::Forward(const Var<T>& x, SchStageTaps<T>* first_taps,
                            SchStageTaps<T>* second_taps,
                            AttentionTrace<T>* trace) const {
  Var<T> h = first.Forward(x, first_taps, nullptr);
  return second.Forward(h, second_taps, trace);
}

template <typename T>
void SchBlock<T>::Visit(const std::string& prefix, const ParamVisitor<T>& fn) {
  first.Visit(prefix + ".stage1", fn);
  second.Visit(prefix + ".stage2", fn);
}

template struct ResidualBlock<float>;
template struct ResidualBlock<double>;
template struct ResidualBlockWithStride<float>;
template struct ResidualBlockWithStride<double>;
template struct ResidualBlockUpsample<float>;
template struct ResidualBlockUpsample<double>;
template struct SchStage<float>;
template struct SchStage<double>;
template struct SchBlock<float>;
template struct SchBlock<double>;

}  // namespace sch
