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

#ifndef SCH_AUTOENCODER_H_
#define SCH_AUTOENCODER_H_

#include <array>
#include <string>
#include <vector>

#include "sch/blocks.h"
#include "sch/config.h"
#include "sch/wavelet.h"

namespace sch {

// Optional probes into the analysis transform.
template <typename T>
struct AnalysisProbe {
  Var<T> stem_conv;        // first convolution after the wavelet transform
  SchStageTaps<T> last_space;    // stage I of the final SCH block
  SchStageTaps<T> last_channel;  // stage II of the final SCH block
  // When >= 0, the SCH block (flat index across stages) whose stage II
  // attention maps are recorded into `trace`.
  int trace_block = -1;
  AttentionTrace<T> trace;
  // Spatial grid of the traced block's input.
  int64_t trace_height = 0;
  int64_t trace_width = 0;
};

// g_a: image [B, 3, H, W] in [0, 1] -> latent y [B, M, H/16, W/16].
//   DWT -> RB(12 -> N) -> {RBS -> SCH x k} for k in sch_stack,
// the last RBS emitting M channels.
template <typename T>
struct AnalysisTransform {
  ModelConfig config;
  ResidualBlock<T> stem;
  std::array<ResidualBlockWithStride<T>, 3> down;
  std::array<std::vector<SchBlock<T>>, 3> stacks;

  AnalysisTransform() = default;
  AnalysisTransform(const ModelConfig& config, Rng& rng);

  Var<T> Forward(const Var<T>& x, AnalysisProbe<T>* probe = nullptr) const;
  int num_blocks() const;
  void Visit(const std::string& prefix, const ParamVisitor<T>& fn);
};

// g_s: latent [B, M, h, w] -> image [B, 3, 16h, 16w], mirroring g_a with
// RBU up-sampling and the inverse wavelet transform.
template <typename T>
struct SynthesisTransform {
  ModelConfig config;
  std::array<std::vector<SchBlock<T>>, 3> stacks;  // applied at M, N, N
  std::array<ResidualBlockUpsample<T>, 3> up;
  ResidualBlock<T> head;  // N -> 12

  SynthesisTransform() = default;
  SynthesisTransform(const ModelConfig& config, Rng& rng);

  Var<T> Forward(const Var<T>& y) const;
  void Visit(const std::string& prefix, const ParamVisitor<T>& fn);
};

}  // namespace sch

#endif  // SCH_AUTOENCODER_H_
