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

#include "sch/model.h"

#include <cstring>

#include "sch/errors.h"

namespace sch {

template <typename T>
Var<T> UniformNoise(const Shape& shape, Rng& rng) {
  std::uniform_real_distribution<double> dist(-0.5, 0.5);
  Tensor<T> t(shape);
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
  return Var<T>(std::move(t));
}

template <typename T>
CompressionModel<T>::CompressionModel(const ModelConfig& cfg, uint64_t seed)
    : config(cfg) {
  config.Validate();
  Rng rng(seed);
  g_a = AnalysisTransform<T>(config, rng);
  g_s = SynthesisTransform<T>(config, rng);
  entropy = EntropyModel<T>(config, rng);
}

template <typename T>
ModelOutput<T> CompressionModel<T>::Forward(const Var<T>& x, QuantMode mode,
                                            Rng* noise_rng) const {
  const bool noisy = mode == QuantMode::kNoise;
  if (noisy && noise_rng == nullptr) {
    throw ConfigError("noise quantisation needs a random generator");
  }
  ModelOutput<T> out;
  out.y = g_a.Forward(x);
  out.z = entropy.h_a(out.y);
  out.z_hat = RoundSte(out.z);
  out.z_bits = Sum(entropy.prior.Bits(
      noisy ? Add(out.z, UniformNoise<T>(out.z.shape(), *noise_rng))
            : out.z_hat));

  SliceContext<T> ctx(entropy, entropy.h_s(out.z_hat));
  const SliceLayout& layout = entropy.layout;
  Var<T> y_bits;
  for (int i = 0; i < layout.slices; ++i) {
    GaussianParams<T> g = ctx.Predict(i);
    Var<T> residual = Sub(Slice(out.y, 1, layout.begin(i), layout.end(i)), g.mu);
    Var<T> q = RoundSte(residual);
    Var<T> rate_input =
        noisy ? Add(residual, UniformNoise<T>(residual.shape(), *noise_rng))
              : q;
    Var<T> bits = Sum(GaussianRate(rate_input, g.sigma));
    y_bits = i == 0 ? bits : Add(y_bits, bits);
    ctx.Commit(i, Add(q, g.mu));
  }
  out.y_bits = y_bits;
  out.y_hat = Concat(ctx.decoded(), 1);
  out.x_hat = g_s.Forward(out.y_hat);
  return out;
}

template <typename T>
void CompressionModel<T>::Visit(const ParamVisitor<T>& fn) {
  g_a.Visit("g_a", fn);
  g_s.Visit("g_s", fn);
  entropy.Visit("entropy", fn);
}

template <typename T>
std::vector<Var<T>> CompressionModel<T>::Parameters() {
  std::vector<Var<T>> params;
  Visit([&](const std::string&, Var<T>& v) { params.push_back(v); });
  return params;
}

template <typename T>
int64_t CompressionModel<T>::ParameterCount() {
  int64_t n = 0;
  Visit([&](const std::string&, Var<T>& v) { n += v.numel(); });
  return n;
}

template <typename T>
uint32_t CompressionModel<T>::Fingerprint() {
  const std::string canon = config.Canonical();
  uint32_t h = Fnv1a(canon.data(), canon.size());
  Visit([&](const std::string& name, Var<T>& v) {
    h = Fnv1a(name.data(), name.size(), h);
    // Hash weights as float so float and double copies agree.
    for (T x : v.value().values()) {
      const float f = static_cast<float>(x);
      h = Fnv1a(&f, sizeof(f), h);
    }
  });
  return h;
}

template struct CompressionModel<float>;
template struct CompressionModel<double>;
template Var<float> UniformNoise(const Shape&, Rng&);
template Var<double> UniformNoise(const Shape&, Rng&);

}  // namespace sch
