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

#ifndef SCH_TRAINING_H_
#define SCH_TRAINING_H_

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "sch/config.h"
#include "sch/image_io.h"
#include "sch/model.h"

namespace sch {

// L = R + lambda * D with R = (y_bits + z_bits) / pixels in bpp and
// D = 255^2 * mean((x - x_hat)^2) for images in [0, 1].
template <typename T>
struct RdTerms {
  Var<T> loss;        // differentiable
  double value = 0;   // rate + lambda * distortion, from the fields below
  double rate = 0;
  double distortion = 0;
};

template <typename T>
RdTerms<T> RdLoss(const Var<T>& x, const Var<T>& x_hat, const Var<T>& y_bits,
                  const Var<T>& z_bits, double lambda);

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Var<float>> params, AdamOptions options);

  // Applies one update from the accumulated gradients, then clears them.
  void Step();
  void ZeroGrad();

  double learning_rate() const { return options_.learning_rate; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }
  int64_t steps() const { return steps_; }

  // State access for checkpoints.
  std::vector<Tensor<float>>& first_moments() { return m_; }
  std::vector<Tensor<float>>& second_moments() { return v_; }
  void set_steps(int64_t s) { steps_ = s; }

 private:
  std::vector<Var<float>> params_;
  AdamOptions options_;
  std::vector<Tensor<float>> m_, v_;
  int64_t steps_ = 0;
};

// Multiplies the rate by `factor` once the eval loss has failed to improve
// for `patience` consecutive evaluations; never goes below `min_lr`.
class PlateauSchedule {
 public:
  PlateauSchedule(double lr, int64_t patience, double factor, double min_lr);
  double Update(double eval_loss);
  double learning_rate() const { return lr_; }
  double best() const { return best_; }
  int64_t bad_evals() const { return bad_; }

 private:
  double lr_;
  int64_t patience_;
  double factor_;
  double min_lr_;
  double best_;
  int64_t bad_ = 0;
};

std::vector<std::string> ListPngs(const std::string& directory);
// Loads images, skipping (with a warning on `log`) those smaller than `crop`.
std::vector<Image> LoadImages(const std::vector<std::string>& paths, int64_t crop,
                              std::ostream* log);

// Uniform random crops, deterministic under the seed.
class CropSampler {
 public:
  struct Coords {
    size_t image;
    int64_t y, x;
  };

  CropSampler(const std::vector<Image>* images, int64_t crop, uint64_t seed);
  Coords NextCoords();
  Tensor<float> Next();  // [3, crop, crop] in [0, 1]
  Tensor<float> Extract(const Coords& c) const;

 private:
  const std::vector<Image>* images_;
  int64_t crop_;
  Rng rng_;
};

// A fixed set of `count` crops, [count, 3, crop, crop].
Tensor<float> MakeCropSet(const std::vector<Image>& images, int64_t count,
                          int64_t crop, uint64_t seed);
Tensor<float> GatherBatch(const Tensor<float>& set,
                          const std::vector<int64_t>& indices);

struct StepStats {
  double loss = 0;
  double rate = 0;
  double distortion = 0;
};

StepStats TrainStep(const CompressionModel<float>& model, Adam& opt,
                    const Tensor<float>& batch, double lambda, Rng& rng);

struct EvalStats {
  double loss = 0;
  double rate = 0;        // estimated bpp
  double distortion = 0;  // 255^2 MSE
  double psnr = 0;        // of the mean MSE
};

// Hard-rounded forward over `set` in chunks of `batch`, without gradients.
EvalStats Evaluate(const CompressionModel<float>& model,
                   const Tensor<float>& set, double lambda, int64_t batch);

// Versioned binary container (native little-endian): magic, version, both
// configs as text, step, fingerprint, named parameters, Adam state.
struct Checkpoint {
  ModelConfig model_config;
  TrainConfig train_config;
  int64_t step = 0;
  uint32_t fingerprint = 0;
  std::vector<std::pair<std::string, Tensor<float>>> params;
  double learning_rate = 0;
  int64_t adam_steps = 0;
  std::vector<Tensor<float>> adam_m, adam_v;
};

void SaveCheckpoint(const std::string& path, CompressionModel<float>& model,
                    const TrainConfig& train, int64_t step, Adam* opt);
Checkpoint ReadCheckpoint(const std::string& path);
// Builds the model stored in a checkpoint; raises IncompatibleModelError when
// names, shapes or the fingerprint disagree.
CompressionModel<float> ModelFromCheckpoint(const Checkpoint& ckpt);
void RestoreOptimizer(const Checkpoint& ckpt, Adam* opt);

// One record of the training log.
struct LogRecord {
  int64_t step = 0;
  double loss = 0, rate = 0, distortion = 0, lr = 0;
  std::string ToJson() const;  // {"step":..,"L":..,"R":..,"D":..,"lr":..}
};

struct TrainOptions {
  TrainConfig config;
  int64_t log_period = 10;
  // Training loss is logged as a mean over the last `log_period` steps.
  std::ostream* log = nullptr;             // NDJSON records
  std::function<void(int64_t step, const EvalStats&)> on_eval;
  std::string checkpoint_path;             // written at every eval when set
};

struct TrainResult {
  std::vector<StepStats> steps;  // per step, in order
  std::vector<std::pair<int64_t, EvalStats>> evals;
};

// Trains on random batches drawn from `crops` with held-out evaluation on
// `eval_set` every eval_period steps (and at the end).
TrainResult Train(CompressionModel<float>& model, const Tensor<float>& crops,
                  const Tensor<float>& eval_set, const TrainOptions& options,
                  Adam* resume = nullptr, int64_t start_step = 0);

}  // namespace sch

#endif  // SCH_TRAINING_H_
