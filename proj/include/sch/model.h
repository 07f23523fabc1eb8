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

#ifndef SCH_MODEL_H_
#define SCH_MODEL_H_

#include <cstdint>
#include <string>
#include <vector>

#include "sch/autoencoder.h"
#include "sch/entropy.h"

namespace sch {

enum class QuantMode {
  kNoise,  // training: uniform noise for the rate, straight-through rounding
           // for the reconstruction path
  kRound,  // inference: hard rounding everywhere
};

template <typename T>
struct ModelOutput {
  Var<T> y;
  Var<T> z;
  Var<T> y_hat;
  Var<T> z_hat;
  Var<T> x_hat;
  Var<T> y_bits;  // total over the batch, shape [1]
  Var<T> z_bits;  // total over the batch, shape [1]
};

// Analysis/synthesis transforms plus the latent entropy model.
template <typename T>
struct CompressionModel {
  ModelConfig config;
  AnalysisTransform<T> g_a;
  SynthesisTransform<T> g_s;
  EntropyModel<T> entropy;

  CompressionModel() = default;
  CompressionModel(const ModelConfig& config, uint64_t seed);

  // x: [B, 3, H, W] in [0, 1]; H, W must satisfy the analysis constraints.
  // `noise_rng` is required for kNoise.
  ModelOutput<T> Forward(const Var<T>& x, QuantMode mode,
                         Rng* noise_rng = nullptr) const;

  void Visit(const ParamVisitor<T>& fn);
  std::vector<Var<T>> Parameters();
  int64_t ParameterCount();
  // Identifies architecture and weights; stored in every bitstream.
  uint32_t Fingerprint();
};

// Uniform noise in [-0.5, 0.5) with the shape of `like`.
template <typename T>
Var<T> UniformNoise(const Shape& shape, Rng& rng);

}  // namespace sch

#endif  // SCH_MODEL_H_
