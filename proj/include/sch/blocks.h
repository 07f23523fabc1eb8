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

#ifndef SCH_BLOCKS_H_
#define SCH_BLOCKS_H_

#include <cstdint>
#include <string>

#include "sch/attention.h"
#include "sch/layers.h"

namespace sch {

// conv3x3 -> leaky ReLU -> conv3x3, plus a skip that is the identity when
// the widths match and a 1x1 projection otherwise.
template <typename T>
struct ResidualBlock {
  ConvLayer<T> conv1;
  ConvLayer<T> conv2;
  ConvLayer<T> skip;  // unused when in == out
  bool project = false;

  ResidualBlock() = default;
  ResidualBlock(int64_t in, int64_t out, Rng& rng);

  Var<T> operator()(const Var<T>& x) const;
  void Visit(const std::string& prefix, const ParamVisitor<T>& fn);
};

// Down-sampling residual block: stride-2 conv3x3 -> leaky ReLU -> conv3x3 on
// the main path, stride-2 conv1x1 on the skip path.
template <typename T>
struct ResidualBlockWithStride {
  ConvLayer<T> conv1;
  ConvLayer<T> conv2;
  ConvLayer<T> skip;

  ResidualBlockWithStride() = default;
  ResidualBlockWithStride(int64_t in, int64_t out, Rng& rng);

  Var<T> operator()(const Var<T>& x) const;
  void Visit(const std::string& prefix, const ParamVisitor<T>& fn);
};

// Up-sampling residual block: sub-pixel conv -> leaky ReLU -> conv3x3 on the
// main path, sub-pixel conv on the skip path.
template <typename T>
struct ResidualBlockUpsample {
  SubpelConvLayer<T> subpel;
  ConvLayer<T> conv;
  SubpelConvLayer<T> skip;

  ResidualBlockUpsample() = default;
  ResidualBlockUpsample(int64_t in, int64_t out, Rng& rng);

  Var<T> operator()(const Var<T>& x) const;
  void Visit(const std::string& prefix, const ParamVisitor<T>& fn);
};

enum class SchStageKind {
  kSpace,    // stage I: window space attention on the attention branch
  kChannel,  // stage II: window channel attention on the attention branch
};

// Intermediate outputs of one stage, for receptive-field probing.
template <typename T>
struct SchStageTaps {
  Var<T> attention;  // attention branch output [B, C/2, H, W]
  Var<T> residual;   // convolution branch output [B, C/2, H, W]
  Var<T> output;
};

// One space-channel hybrid stage on C channels:
//   a, c = Split(Conv1x1(x));  out = x + Conv1x1(Concat(Attn(a), RB(c)))
template <typename T>
struct SchStage {
  SchStageKind kind = SchStageKind::kSpace;
  ConvLayer<T> pre;
  AttentionParams<T> attention;
  ResidualBlock<T> residual;
  ConvLayer<T> post;

  SchStage() = default;
  SchStage(SchStageKind kind, int64_t channels, int64_t window_size,
           int64_t heads, int64_t mlp_ratio, Rng& rng);

  int64_t channels() const { return pre.weight.dim(0); }
  Var<T> Forward(const Var<T>& x, SchStageTaps<T>* taps = nullptr,
                 AttentionTrace<T>* trace = nullptr) const;
  void Visit(const std::string& prefix, const ParamVisitor<T>& fn);
};

// The repeating unit of a stack: stage I followed by stage II. With channel
// attention disabled (ablation), stage II also uses space attention.
template <typename T>
struct SchBlock {
  SchStage<T> first;
  SchStage<T> second;

  SchBlock() = default;
  SchBlock(int64_t channels, int64_t window_size, int64_t heads,
           int64_t mlp_ratio, bool channel_attention, Rng& rng);

  Var<T> Forward(const Var<T>& x, SchStageTaps<T>* first_taps = nullptr,
                 SchStageTaps<T>* second_taps = nullptr,
                 AttentionTrace<T>* trace = nullptr) const;
  void Visit(const std::string& prefix, const ParamVisitor<T>& fn);
};

}  // namespace sch

#endif  // SCH_BLOCKS_H_
