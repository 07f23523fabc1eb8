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

#include "sch/entropy.h"

#include <cmath>

#include "sch/errors.h"

namespace sch {
namespace {

double SoftplusD(double v) { return v > 30.0 ? v : std::log1p(std::exp(v)); }

template <typename T>
std::vector<Var<T>> ContextInputs(const HyperSide<T>& side,
                                  const std::vector<Var<T>>& decoded) {
  std::vector<Var<T>> parts = {side.mu, side.sigma};
  parts.insert(parts.end(), decoded.begin(), decoded.end());
  return parts;
}

}  // namespace

template <typename T>
HyperAnalysis<T>::HyperAnalysis(int64_t m, int64_t z, Rng& rng)
    : conv1(m, z, 3, 1, rng), conv2(z, z, 3, 2, rng), conv3(z, z, 3, 2, rng) {}

template <typename T>
Var<T> HyperAnalysis<T>::operator()(const Var<T>& y) const {
  if (y.value().rank() != 4 || y.dim(1) != conv1.weight.dim(1) ||
      y.dim(2) % 4 != 0 || y.dim(3) % 4 != 0) {
    throw DimensionError("hyper analysis needs [B, M, h, w] with h, w "
                         "divisible by 4, got " + ShapeString(y.shape()));
  }
  return conv3(Lrelu(conv2(Lrelu(conv1(y)))));
}

template <typename T>
void HyperAnalysis<T>::Visit(const std::string& prefix,
                             const ParamVisitor<T>& fn) {
  conv1.Visit(prefix + ".conv1", fn);
  conv2.Visit(prefix + ".conv2", fn);
  conv3.Visit(prefix + ".conv3", fn);
}

template <typename T>
HyperSynthesis<T>::HyperSynthesis(int64_t z, int64_t m, Rng& rng)
    : mean_up1(z, z, 2, rng),
      mean_up2(z, m, 2, rng),
      scale_up1(z, z, 2, rng),
      scale_up2(z, m, 2, rng),
      mean_out(m, m, 3, 1, rng),
      scale_out(m, m, 3, 1, rng) {}

template <typename T>
HyperSide<T> HyperSynthesis<T>::operator()(const Var<T>& z_hat) const {
  if (z_hat.value().rank() != 4 ||
      z_hat.dim(1) != mean_up1.conv.weight.dim(1)) {
    throw DimensionError("hyper synthesis got " + ShapeString(z_hat.shape()));
  }
  HyperSide<T> side;
  side.mu = mean_out(Lrelu(mean_up2(Lrelu(mean_up1(z_hat)))));
  side.sigma = scale_out(Lrelu(scale_up2(Lrelu(scale_up1(z_hat)))));
  return side;
}

template <typename T>
void HyperSynthesis<T>::Visit(const std::string& prefix,
                              const ParamVisitor<T>& fn) {
  mean_up1.Visit(prefix + ".mean_up1", fn);
  mean_up2.Visit(prefix + ".mean_up2", fn);
  mean_out.Visit(prefix + ".mean_out", fn);
  scale_up1.Visit(prefix + ".scale_up1", fn);
  scale_up2.Visit(prefix + ".scale_up2", fn);
  scale_out.Visit(prefix + ".scale_out", fn);
}

template <typename T>
FactorizedPrior<T>::FactorizedPrior(int64_t c, Rng& rng, double init_scale)
    : channels(c) {
  const int64_t dims[kStages + 1] = {1, 3, 3, 3, 1};
  const double scale = std::pow(init_scale, 1.0 / kStages);
  std::uniform_real_distribution<double> unit(-0.5, 0.5);
  for (int i = 0; i < kStages; ++i) {
    const double init = std::log(std::expm1(1.0 / scale / dims[i + 1]));
    matrices.push_back(
        ConstantParam<T>({c, dims[i + 1], dims[i]}, static_cast<T>(init)));
    Tensor<T> b({c, dims[i + 1], 1});
    for (auto& v : b.values()) v = static_cast<T>(unit(rng));
    biases.emplace_back(std::move(b), true);
    if (i + 1 < kStages) {
      factors.push_back(ConstantParam<T>({c, dims[i + 1], 1}, T(0)));
    }
  }
}

template <typename T>
Var<T> FactorizedPrior<T>::Logits(const Var<T>& v) const {
  if (v.value().rank() != 3 || v.dim(0) != channels || v.dim(1) != 1) {
    throw DimensionError("factorized prior logits need [C, 1, P], got " +
                         ShapeString(v.shape()));
  }
  const int64_t points = v.dim(2);
  Var<T> x = v;
  for (int i = 0; i < kStages; ++i) {
    x = Add(MatMul(Softplus(matrices[i]), x), RepeatLast(biases[i], points));
    if (i + 1 < kStages) {
      x = Add(x, Mul(RepeatLast(Tanh(factors[i]), points), Tanh(x)));
    }
  }
  return x;
}

template <typename T>
Var<T> FactorizedPrior<T>::Bits(const Var<T>& z) const {
  if (z.value().rank() != 4 || z.dim(1) != channels) {
    throw DimensionError("factorized prior expects [B, " +
                         std::to_string(channels) + ", h, w], got " +
                         ShapeString(z.shape()));
  }
  const int64_t b = z.dim(0), h = z.dim(2), w = z.dim(3);
  const int64_t points = b * h * w;
  Var<T> flat = Reshape(Permute(z, {1, 0, 2, 3}), {channels, 1, points});
  Var<T> logits = Logits(
      Concat<T>({AddScalar(flat, T(-0.5)), AddScalar(flat, T(0.5))}, 2));
  Var<T> bits = LogisticBinBits(Slice(logits, 2, 0, points),
                                Slice(logits, 2, points, 2 * points),
                                kLikelihoodFloor);
  return Permute(Reshape(bits, {channels, b, h, w}), {1, 0, 2, 3});
}

template <typename T>
std::vector<double> FactorizedPrior<T>::ChannelLogits(
    int64_t c, const std::vector<double>& points) const {
  if (c < 0 || c >= channels) {
    throw DimensionError("factorized prior channel out of range");
  }
  std::vector<double> out;
  out.reserve(points.size());
  for (double p : points) {
    std::vector<double> x = {p};
    for (int i = 0; i < kStages; ++i) {
      const Tensor<T>& m = matrices[i].value();
      const int64_t rows = m.dim(1), cols = m.dim(2);
      std::vector<double> y(rows);
      for (int64_t r = 0; r < rows; ++r) {
        double acc = biases[i].value()[c * rows + r];
        for (int64_t k = 0; k < cols; ++k) {
          acc += SoftplusD(m[(c * rows + r) * cols + k]) * x[k];
        }
        if (i + 1 < kStages) {
          acc += std::tanh(double(factors[i].value()[c * rows + r])) *
                 std::tanh(acc);
        }
        y[r] = acc;
      }
      x = std::move(y);
    }
    out.push_back(x[0]);
  }
  return out;
}

template <typename T>
void FactorizedPrior<T>::Visit(const std::string& prefix,
                               const ParamVisitor<T>& fn) {
  for (int i = 0; i < kStages; ++i) {
    const std::string s = std::to_string(i);
    fn(prefix + ".matrix" + s, matrices[i]);
    fn(prefix + ".bias" + s, biases[i]);
    if (i + 1 < kStages) fn(prefix + ".factor" + s, factors[i]);
  }
}

SliceLayout::SliceLayout(int64_t c, int s) : channels(c), slices(s) {
  if (s < 1 || c % s != 0) {
    throw ConfigError("cannot split " + std::to_string(c) +
                      " latent channels into " + std::to_string(s) +
                      " equal slices");
  }
}

template <typename T>
SlicePredictor<T>::SlicePredictor(int i, int64_t m, int64_t sc, int64_t width,
                                  Rng& rng)
    : index(i),
      conv1(2 * m + i * sc, width, 3, 1, rng),
      conv2(width, width, 3, 1, rng),
      conv3(width, 2 * sc, 3, 1, rng) {}

template <typename T>
GaussianParams<T> SlicePredictor<T>::operator()(
    const HyperSide<T>& side, const std::vector<Var<T>>& decoded) const {
  if (static_cast<int>(decoded.size()) != index) {
    throw SequencingError("slice " + std::to_string(index) + " needs " +
                          std::to_string(index) + " decoded slices, got " +
                          std::to_string(decoded.size()));
  }
  Var<T> in = Concat(ContextInputs(side, decoded), 1);
  if (in.dim(1) != conv1.weight.dim(1)) {
    throw DimensionError("slice context has " + std::to_string(in.dim(1)) +
                         " channels, expected " +
                         std::to_string(conv1.weight.dim(1)));
  }
  Var<T> out = conv3(Lrelu(conv2(Lrelu(conv1(in)))));
  const int64_t sc = out.dim(1) / 2;
  GaussianParams<T> g;
  g.mu = Slice(out, 1, 0, sc);
  g.sigma = Exp(ClampBounded(Slice(out, 1, sc, 2 * sc),
                             static_cast<T>(std::log(kScaleMin)),
                             static_cast<T>(std::log(kScaleMax))));
  return g;
}

template <typename T>
void SlicePredictor<T>::Visit(const std::string& prefix,
                              const ParamVisitor<T>& fn) {
  conv1.Visit(prefix + ".conv1", fn);
  conv2.Visit(prefix + ".conv2", fn);
  conv3.Visit(prefix + ".conv3", fn);
}

template <typename T>
LatentResidualPredictor<T>::LatentResidualPredictor(int i, int64_t m,
                                                    int64_t sc, int64_t width,
                                                    Rng& rng)
    : index(i),
      conv1(2 * m + (i + 1) * sc, width, 3, 1, rng),
      conv2(width, sc, 3, 1, rng) {}

template <typename T>
Var<T> LatentResidualPredictor<T>::operator()(
    const HyperSide<T>& side, const std::vector<Var<T>>& decoded,
    const Var<T>& current) const {
  if (static_cast<int>(decoded.size()) != index) {
    throw SequencingError("residual predictor " + std::to_string(index) +
                          " called with " + std::to_string(decoded.size()) +
                          " decoded slices");
  }
  std::vector<Var<T>> parts = ContextInputs(side, decoded);
  parts.push_back(current);
  Var<T> in = Concat(parts, 1);
  if (in.dim(1) != conv1.weight.dim(1)) {
    throw DimensionError("residual context has " + std::to_string(in.dim(1)) +
                         " channels, expected " +
                         std::to_string(conv1.weight.dim(1)));
  }
  return Scale(Tanh(conv2(Lrelu(conv1(in)))), T(0.5));
}

template <typename T>
void LatentResidualPredictor<T>::Visit(const std::string& prefix,
                                       const ParamVisitor<T>& fn) {
  conv1.Visit(prefix + ".conv1", fn);
  conv2.Visit(prefix + ".conv2", fn);
}

template <typename T>
EntropyModel<T>::EntropyModel(const ModelConfig& config, Rng& rng)
    : layout(config.m, config.slices),
      h_a(config.m, config.z_channels, rng),
      h_s(config.z_channels, config.m, rng),
      prior(config.z_channels, rng) {
  const int64_t sc = layout.slice_channels();
  for (int i = 0; i < layout.slices; ++i) {
    predictors.emplace_back(i, config.m, sc, config.entropy_width, rng);
    residuals.emplace_back(i, config.m, sc, config.entropy_width, rng);
  }
}

template <typename T>
void EntropyModel<T>::Visit(const std::string& prefix,
                            const ParamVisitor<T>& fn) {
  h_a.Visit(prefix + ".h_a", fn);
  h_s.Visit(prefix + ".h_s", fn);
  prior.Visit(prefix + ".prior", fn);
  for (auto& p : predictors) {
    p.Visit(prefix + ".slice" + std::to_string(p.index), fn);
  }
  for (auto& r : residuals) {
    r.Visit(prefix + ".lrp" + std::to_string(r.index), fn);
  }
}

template <typename T>
SliceContext<T>::SliceContext(const EntropyModel<T>& model, HyperSide<T> side)
    : model_(&model), side_(std::move(side)) {}

template <typename T>
GaussianParams<T> SliceContext<T>::Predict(int i) const {
  if (i != next() || i >= slices()) {
    throw SequencingError("slice " + std::to_string(i) +
                          " requested while slice " + std::to_string(next()) +
                          " is next");
  }
  return model_->predictors[i](side_, decoded_);
}

template <typename T>
Var<T> SliceContext<T>::Commit(int i, const Var<T>& y_hat_slice) {
  if (i != next() || i >= slices()) {
    throw SequencingError("slice " + std::to_string(i) +
                          " committed while slice " + std::to_string(next()) +
                          " is next");
  }
  Var<T> r = model_->residuals[i](side_, decoded_, y_hat_slice);
  decoded_.push_back(Add(y_hat_slice, r));
  return decoded_.back();
}

template <typename T>
Var<T> GaussianRate(const Var<T>& v, const Var<T>& sigma) {
  return GaussianBits(v, sigma, kLikelihoodFloor);
}

#define SCH_INSTANTIATE_ENTROPY(T)                                   \
  template struct HyperAnalysis<T>;                                  \
  template struct HyperSynthesis<T>;                                 \
  template struct FactorizedPrior<T>;                                \
  template struct SlicePredictor<T>;                                 \
  template struct LatentResidualPredictor<T>;                        \
  template struct EntropyModel<T>;                                   \
  template class SliceContext<T>;                                    \
  template Var<T> GaussianRate(const Var<T>&, const Var<T>&);

SCH_INSTANTIATE_ENTROPY(float)
SCH_INSTANTIATE_ENTROPY(double)

}  // namespace sch
