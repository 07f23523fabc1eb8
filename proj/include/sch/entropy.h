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

#ifndef SCH_ENTROPY_H_
#define SCH_ENTROPY_H_

#include <cstdint>
#include <string>
#include <vector>

#include "sch/config.h"
#include "sch/layers.h"

namespace sch {

// Likelihoods are floored here before taking logs.
inline constexpr double kLikelihoodFloor = 5.421010862427522e-20;  // 2^-64
inline constexpr double kScaleMin = 0.11;
inline constexpr double kScaleMax = 256.0;

// h_a: y [B, M, h, w] -> z [B, Z, h/4, w/4].
template <typename T>
struct HyperAnalysis {
  ConvLayer<T> conv1, conv2, conv3;

  HyperAnalysis() = default;
  HyperAnalysis(int64_t m, int64_t z, Rng& rng);
  Var<T> operator()(const Var<T>& y) const;
  void Visit(const std::string& prefix, const ParamVisitor<T>& fn);
};

template <typename T>
struct HyperSide {
  Var<T> mu;     // [B, M, h, w]
  Var<T> sigma;  // [B, M, h, w]
};

// h_s: z_hat -> (mu_side, sigma_side), separate mean and scale branches.
template <typename T>
struct HyperSynthesis {
  SubpelConvLayer<T> mean_up1, mean_up2, scale_up1, scale_up2;
  ConvLayer<T> mean_out, scale_out;

  HyperSynthesis() = default;
  HyperSynthesis(int64_t z, int64_t m, Rng& rng);
  HyperSide<T> operator()(const Var<T>& z_hat) const;
  void Visit(const std::string& prefix, const ParamVisitor<T>& fn);
};

// Non-parametric per-channel density for z (learned CDF through a chain of
// per-channel 3-wide dense layers).
template <typename T>
struct FactorizedPrior {
  static constexpr int kStages = 4;
  int64_t channels = 0;
  std::vector<Var<T>> matrices;  // raw, softplus'd on use: [C, out, in]
  std::vector<Var<T>> biases;    // [C, out, 1]
  std::vector<Var<T>> factors;   // [C, out, 1], all stages but the last

  FactorizedPrior() = default;
  FactorizedPrior(int64_t channels, Rng& rng, double init_scale = 10.0);

  // CDF logits of v [C, 1, P].
  Var<T> Logits(const Var<T>& v) const;
  // Bits per element of integer-valued (or noisy) z [B, C, h, w].
  Var<T> Bits(const Var<T>& z) const;
  // CDF logits for channel c at the given points, in double precision.
  std::vector<double> ChannelLogits(int64_t c,
                                    const std::vector<double>& points) const;
  void Visit(const std::string& prefix, const ParamVisitor<T>& fn);
};

template <typename T>
struct GaussianParams {
  Var<T> mu;     // [B, slice_channels, h, w]
  Var<T> sigma;  // in [kScaleMin, kScaleMax]
};

// Channel partition of the latent into equal slices.
struct SliceLayout {
  int64_t channels = 0;
  int slices = 1;

  SliceLayout() = default;
  SliceLayout(int64_t channels, int slices);
  int64_t slice_channels() const { return channels / slices; }
  int64_t begin(int i) const { return i * slice_channels(); }
  int64_t end(int i) const { return (i + 1) * slice_channels(); }
};

// e_i: (mu_side, sigma_side, y_hat_<i) -> Gaussian parameters of slice i.
template <typename T>
struct SlicePredictor {
  int index = 0;
  ConvLayer<T> conv1, conv2, conv3;

  SlicePredictor() = default;
  SlicePredictor(int index, int64_t m, int64_t slice_channels, int64_t width,
                 Rng& rng);
  GaussianParams<T> operator()(const HyperSide<T>& side,
                               const std::vector<Var<T>>& decoded) const;
  void Visit(const std::string& prefix, const ParamVisitor<T>& fn);
};

// Latent residual prediction: (mu_side, sigma_side, y_hat_<=i) ->
// r_i = 0.5 tanh(.) added to the dequantised slice.
template <typename T>
struct LatentResidualPredictor {
  int index = 0;
  ConvLayer<T> conv1, conv2;

  LatentResidualPredictor() = default;
  LatentResidualPredictor(int index, int64_t m, int64_t slice_channels,
                          int64_t width, Rng& rng);
  Var<T> operator()(const HyperSide<T>& side,
                    const std::vector<Var<T>>& decoded,
                    const Var<T>& current) const;
  void Visit(const std::string& prefix, const ParamVisitor<T>& fn);
};

// The complete latent entropy model: hyperprior plus channel slices.
template <typename T>
struct EntropyModel {
  SliceLayout layout;
  HyperAnalysis<T> h_a;
  HyperSynthesis<T> h_s;
  FactorizedPrior<T> prior;
  std::vector<SlicePredictor<T>> predictors;
  std::vector<LatentResidualPredictor<T>> residuals;

  EntropyModel() = default;
  EntropyModel(const ModelConfig& config, Rng& rng);
  void Visit(const std::string& prefix, const ParamVisitor<T>& fn);
};

// Enforces the decode order of slices: parameters for slice i can only be
// requested once slices 0..i-1 have been committed.
template <typename T>
class SliceContext {
 public:
  SliceContext(const EntropyModel<T>& model, HyperSide<T> side);

  int next() const { return static_cast<int>(decoded_.size()); }
  int slices() const { return model_->layout.slices; }
  GaussianParams<T> Predict(int i) const;
  // Adds the latent residual to the dequantised slice i, stores and returns
  // the result.
  Var<T> Commit(int i, const Var<T>& y_hat_slice);
  const std::vector<Var<T>>& decoded() const { return decoded_; }
  const HyperSide<T>& side() const { return side_; }

 private:
  const EntropyModel<T>* model_;
  HyperSide<T> side_;
  std::vector<Var<T>> decoded_;
};

// Bits per element of residual v = y_q - mu under N(0, sigma^2).
template <typename T>
Var<T> GaussianRate(const Var<T>& v, const Var<T>& sigma);

}  // namespace sch

#endif  // SCH_ENTROPY_H_
