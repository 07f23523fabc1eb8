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

#include "sch/autoencoder.h"

namespace sch {
namespace {

WaveletScaling Scaling(const ModelConfig& c) {
  return c.orthonormal_wavelet ? WaveletScaling::kOrthonormal
                               : WaveletScaling::kUnnormalized;
}

}  // namespace

template <typename T>
AnalysisTransform<T>::AnalysisTransform(const ModelConfig& cfg, Rng& rng)
    : config(cfg) {
  config.Validate();
  stem = ResidualBlock<T>(12, config.n, rng);
  for (int s = 0; s < 3; ++s) {
    const int64_t width = s == 2 ? config.m : config.n;
    down[s] = ResidualBlockWithStride<T>(config.n, width, rng);
    for (int64_t k = 0; k < config.sch_stack[s]; ++k) {
      stacks[s].emplace_back(width, config.window_size, config.heads,
                             config.mlp_ratio, config.channel_attention, rng);
    }
  }
}

template <typename T>
Var<T> AnalysisTransform<T>::Forward(const Var<T>& x,
                                     AnalysisProbe<T>* probe) const {
  const int64_t multiple = 16 * config.window_size;
  if (x.value().rank() != 4 || x.dim(1) != 3 || x.dim(2) % multiple != 0 ||
      x.dim(3) % multiple != 0) {
    throw DimensionError("analysis transform needs [B, 3, H, W] with H, W "
                         "divisible by " + std::to_string(multiple) + ", got " +
                         ShapeString(x.shape()));
  }
  Var<T> h = HaarDwt(x, Scaling(config));
  Var<T> first = stem.conv1(h);
  if (probe) probe->stem_conv = first;
  Var<T> main = stem.conv2(Lrelu(first));
  h = Add(stem.project ? stem.skip(h) : h, main);

  int flat = 0;
  const int last_stage = [&] {
    for (int s = 2; s >= 0; --s) {
      if (!stacks[s].empty()) return s;
    }
    return -1;
  }();
  for (int s = 0; s < 3; ++s) {
    h = down[s](h);
    for (size_t k = 0; k < stacks[s].size(); ++k, ++flat) {
      const bool last =
          s == last_stage && k + 1 == stacks[s].size() && probe != nullptr;
      const bool traced = probe != nullptr && probe->trace_block == flat;
      if (traced) {
        probe->trace_height = h.dim(2);
        probe->trace_width = h.dim(3);
      }
      h = stacks[s][k].Forward(h, last ? &probe->last_space : nullptr,
                               last ? &probe->last_channel : nullptr,
                               traced ? &probe->trace : nullptr);
    }
  }
  return h;
}

template <typename T>
int AnalysisTransform<T>::num_blocks() const {
  return static_cast<int>(stacks[0].size() + stacks[1].size() +
                          stacks[2].size());
}

template <typename T>
void AnalysisTransform<T>::Visit(const std::string& prefix,
                                 const ParamVisitor<T>& fn) {
  stem.Visit(prefix + ".stem", fn);
  for (int s = 0; s < 3; ++s) {
    const std::string stage = prefix + ".stage" + std::to_string(s);
    down[s].Visit(stage + ".down", fn);
    for (size_t k = 0; k < stacks[s].size(); ++k) {
      stacks[s][k].Visit(stage + ".block" + std::to_string(k), fn);
    }
  }
}

template <typename T>
SynthesisTransform<T>::SynthesisTransform(const ModelConfig& cfg, Rng& rng)
    : config(cfg) {
  config.Validate();
  for (int s = 0; s < 3; ++s) {
    // Stage s of g_s mirrors stage 2 - s of g_a.
    const int64_t width = s == 0 ? config.m : config.n;
    for (int64_t k = 0; k < config.sch_stack[2 - s]; ++k) {
      stacks[s].emplace_back(width, config.window_size, config.heads,
                             config.mlp_ratio, config.channel_attention, rng);
    }
    up[s] = ResidualBlockUpsample<T>(width, config.n, rng);
  }
  head = ResidualBlock<T>(config.n, 12, rng);
}

template <typename T>
Var<T> SynthesisTransform<T>::Forward(const Var<T>& y) const {
  if (y.value().rank() != 4 || y.dim(1) != config.m ||
      y.dim(2) % config.window_size != 0 || y.dim(3) % config.window_size != 0) {
    throw DimensionError("synthesis transform needs [B, " +
                         std::to_string(config.m) +
                         ", h, w] with h, w divisible by the window size, got " +
                         ShapeString(y.shape()));
  }
  Var<T> h = y;
  for (int s = 0; s < 3; ++s) {
    for (const auto& block : stacks[s]) h = block.Forward(h);
    h = up[s](h);
  }
  h = head(h);
  return HaarIdwt(h, Scaling(config));
}

template <typename T>
void SynthesisTransform<T>::Visit(const std::string& prefix,
                                  const ParamVisitor<T>& fn) {
  for (int s = 0; s < 3; ++s) {
    const std::string stage = prefix + ".stage" + std::to_string(s);
    for (size_t k = 0; k < stacks[s].size(); ++k) {
      stacks[s][k].Visit(stage + ".block" + std::to_string(k), fn);
    }
    up[s].Visit(stage + ".up", fn);
  }
  head.Visit(prefix + ".head", fn);
}

template struct AnalysisTransform<float>;
template struct AnalysisTransform<double>;
template struct SynthesisTransform<float>;
template struct SynthesisTransform<double>;

}  // namespace sch
