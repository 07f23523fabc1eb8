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

#ifndef SCH_CONFIG_H_
#define SCH_CONFIG_H_

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace sch {

// Rate-distortion trade-offs, one trained model per entry.
inline constexpr std::array<double, 6> kLambdas = {0.0025, 0.0035, 0.0067,
                                                    0.013,  0.025,  0.05};

// Architecture hyperparameters.
struct ModelConfig {
  int64_t n = 256;           // internal width
  int64_t m = 320;           // latent channels
  int64_t z_channels = 192;  // hyper-latent channels
  std::vector<int64_t> sch_stack = {2, 4, 2};  // SCH blocks per stage
  int64_t window_size = 8;
  int64_t heads = 8;
  int64_t mlp_ratio = 2;
  int64_t slices = 5;
  int64_t entropy_width = 224;  // hidden width of slice and LRP networks
  int lambda_index = 3;
  bool orthonormal_wavelet = true;
  bool channel_attention = true;  // false: stage II falls back to space attn

  // Small configuration used by tests and the acceptance suite.
  static ModelConfig Toy();

  double lambda() const { return kLambdas.at(lambda_index); }
  int64_t slice_channels() const { return m / slices; }
  // Spatial multiple the codec pads to: hyper-latent stride 64 and whole
  // windows at the 1/16 latent resolution.
  int64_t pad_multiple() const;

  // Throws ConfigError on inconsistent values.
  void Validate() const;
  // Stable "key=value" lines, sorted by key.
  std::string Canonical() const;
  // Unknown keys raise ConfigError.
  void Set(const std::string& key, const std::string& value);
};

// Training-loop settings.
struct TrainConfig {
  double lambda = 0.013;
  int64_t batch_size = 8;
  double learning_rate = 1e-4;
  int64_t plateau_patience = 5;
  double plateau_factor = 0.3;
  double min_learning_rate = 1e-7;
  int64_t crop_size = 256;
  int64_t max_steps = 1000;
  int64_t eval_period = 100;
  uint64_t seed = 1;

  void Validate() const;
  std::string Canonical() const;
  void Set(const std::string& key, const std::string& value);
};

// Parses "key = value" lines; '#' starts a comment. Duplicate keys keep the
// last value.
std::map<std::string, std::string> ParseKeyValues(const std::string& text);

// Routes keys of the form "model.<field>" and "train.<field>" (or bare field
// names, tried against the model first) to the two configs.
void ApplyKeyValues(const std::map<std::string, std::string>& kv,
                    ModelConfig* model, TrainConfig* train);

// 32-bit FNV-1a.
uint32_t Fnv1a(const void* data, size_t size, uint32_t seed = 2166136261u);

}  // namespace sch

#endif  // SCH_CONFIG_H_
