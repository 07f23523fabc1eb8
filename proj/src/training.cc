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

#include "sch/training.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "sch/errors.h"

namespace sch {
namespace {

constexpr char kCheckpointMagic[8] = {'S', 'C', 'H', 'C', 'K', 'P', 'T', 0};
constexpr uint32_t kCheckpointVersion = 1;

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path)
      : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw InputError("cannot write " + path);
  }
  template <typename V>
  void Put(const V& v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(V));
  }
  void PutString(const std::string& s) {
    Put<uint64_t>(s.size());
    out_.write(s.data(), s.size());
  }
  void PutTensor(const Tensor<float>& t) {
    Put<uint32_t>(t.rank());
    for (int64_t d : t.shape()) Put<int64_t>(d);
    out_.write(reinterpret_cast<const char*>(t.data()), t.numel() * sizeof(float));
  }
  void Close() {
    out_.close();
    if (!out_) throw InputError("failed writing " + path_);
  }

 private:
  std::string path_;
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::string& path)
      : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw InputError("cannot open " + path);
  }
  template <typename V>
  V Get() {
    V v;
    Read(&v, sizeof(V));
    return v;
  }
  std::string GetString() {
    const uint64_t n = Get<uint64_t>();
    if (n > (1u << 26)) Fail();
    std::string s(n, '\0');
    Read(s.data(), n);
    return s;
  }
  Tensor<float> GetTensor() {
    const uint32_t rank = Get<uint32_t>();
    if (rank > 8) Fail();
    Shape shape(rank);
    for (auto& d : shape) {
      d = Get<int64_t>();
      if (d < 0 || d > (1 << 24)) Fail();
    }
    Tensor<float> t(shape);
    Read(t.data(), t.numel() * sizeof(float));
    return t;
  }
  void Read(void* dst, size_t n) {
    in_.read(reinterpret_cast<char*>(dst), n);
    if (!in_) Fail();
  }
  [[noreturn]] void Fail() const {
    throw IncompatibleModelError("truncated or corrupt checkpoint " + path_);
  }

 private:
  std::string path_;
  std::ifstream in_;
};

double PsnrFromDistortion(double d) {
  return d <= 0 ? 100.0 : std::min(100.0, 10.0 * std::log10(255.0 * 255.0 / d));
}

int LambdaIndex(double lambda) {
  for (size_t i = 0; i < kLambdas.size(); ++i) {
    if (std::abs(kLambdas[i] - lambda) < 1e-12) return static_cast<int>(i);
  }
  throw ConfigError("lambda " + std::to_string(lambda) + " is not in the set");
}

}  // namespace

template <typename T>
RdTerms<T> RdLoss(const Var<T>& x, const Var<T>& x_hat, const Var<T>& y_bits,
                  const Var<T>& z_bits, double lambda) {
  if (x.shape() != x_hat.shape() || x.value().rank() != 4) {
    throw DimensionError("rd loss needs matching [B, C, H, W] images, got " +
                         ShapeString(x.shape()) + " and " +
                         ShapeString(x_hat.shape()));
  }
  const double pixels = double(x.dim(0)) * x.dim(2) * x.dim(3);
  Var<T> diff = Sub(x, x_hat);
  Var<T> distortion = Scale(Mean(Mul(diff, diff)), T(255.0 * 255.0));
  Var<T> rate = Scale(Add(y_bits, z_bits), static_cast<T>(1.0 / pixels));
  RdTerms<T> terms;
  terms.loss = Add(rate, Scale(distortion, static_cast<T>(lambda)));
  terms.rate = rate.value()[0];
  terms.distortion = distortion.value()[0];
  terms.value = terms.rate + lambda * terms.distortion;
  return terms;
}

template RdTerms<float> RdLoss(const Var<float>&, const Var<float>&,
                               const Var<float>&, const Var<float>&, double);
template RdTerms<double> RdLoss(const Var<double>&, const Var<double>&,
                                const Var<double>&, const Var<double>&, double);

Adam::Adam(std::vector<Var<float>> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  for (const auto& p : params_) {
    m_.emplace_back(p.shape());
    v_.emplace_back(p.shape());
  }
}

void Adam::Step() {
  ++steps_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, double(steps_));
  const double c2 = 1.0 - std::pow(b2, double(steps_));
  const double lr = options_.learning_rate;
  for (size_t i = 0; i < params_.size(); ++i) {
    Var<float>& p = params_[i];
    if (!p.has_grad()) continue;
    const Tensor<float>& g = p.grad();
    float* w = p.mutable_value().data();
    float* m = m_[i].data();
    float* v = v_[i].data();
    for (int64_t k = 0; k < g.numel(); ++k) {
      m[k] = static_cast<float>(b1 * m[k] + (1 - b1) * g[k]);
      v[k] = static_cast<float>(b2 * v[k] + (1 - b2) * double(g[k]) * g[k]);
      const double mh = m[k] / c1, vh = v[k] / c2;
      w[k] -= static_cast<float>(lr * mh / (std::sqrt(vh) + options_.eps));
    }
  }
  ZeroGrad();
}

void Adam::ZeroGrad() {
  for (auto& p : params_) p.ZeroGrad();
}

PlateauSchedule::PlateauSchedule(double lr, int64_t patience, double factor,
                                 double min_lr)
    : lr_(lr),
      patience_(patience),
      factor_(factor),
      min_lr_(min_lr),
      best_(std::numeric_limits<double>::infinity()) {}

double PlateauSchedule::Update(double eval_loss) {
  if (eval_loss < best_) {
    best_ = eval_loss;
    bad_ = 0;
    return lr_;
  }
  if (++bad_ >= patience_) {
    lr_ = std::max(min_lr_, lr_ * factor_);
    bad_ = 0;
  }
  return lr_;
}

std::vector<std::string> ListPngs(const std::string& directory) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(directory)) {
    throw InputError("not a directory: " + directory);
  }
  std::vector<std::string> paths;
  for (const auto& e : fs::directory_iterator(directory)) {
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (e.is_regular_file() && ext == ".png") paths.push_back(e.path().string());
  }
  std::sort(paths.begin(), paths.end());
  return paths;
}

std::vector<Image> LoadImages(const std::vector<std::string>& paths,
                              int64_t crop, std::ostream* log) {
  std::vector<Image> images;
  for (const auto& p : paths) {
    Image im = ReadPng(p);
    if (im.width < crop || im.height < crop) {
      if (log) {
        *log << "warning: skipping " << p << " (" << im.width << "x"
             << im.height << " is smaller than the " << crop << " crop)\n";
      }
      continue;
    }
    images.push_back(std::move(im));
  }
  return images;
}

CropSampler::CropSampler(const std::vector<Image>* images, int64_t crop,
                         uint64_t seed)
    : images_(images), crop_(crop), rng_(seed) {
  if (images_->empty()) throw InputError("no images large enough to crop");
  for (const auto& im : *images_) {
    if (im.width < crop || im.height < crop) {
      throw InputError("image smaller than the crop size");
    }
  }
}

CropSampler::Coords CropSampler::NextCoords() {
  std::uniform_int_distribution<size_t> pick(0, images_->size() - 1);
  Coords c;
  c.image = pick(rng_);
  const Image& im = (*images_)[c.image];
  c.y = std::uniform_int_distribution<int64_t>(0, im.height - crop_)(rng_);
  c.x = std::uniform_int_distribution<int64_t>(0, im.width - crop_)(rng_);
  return c;
}

Tensor<float> CropSampler::Extract(const Coords& c) const {
  const Image& im = (*images_)[c.image];
  Tensor<float> t({3, crop_, crop_});
  for (int k = 0; k < 3; ++k) {
    for (int64_t y = 0; y < crop_; ++y) {
      for (int64_t x = 0; x < crop_; ++x) {
        t[(k * crop_ + y) * crop_ + x] = im.at(c.y + y, c.x + x, k) / 255.0f;
      }
    }
  }
  return t;
}

Tensor<float> CropSampler::Next() { return Extract(NextCoords()); }

Tensor<float> MakeCropSet(const std::vector<Image>& images, int64_t count,
                          int64_t crop, uint64_t seed) {
  CropSampler sampler(&images, crop, seed);
  Tensor<float> set({count, 3, crop, crop});
  const int64_t each = 3 * crop * crop;
  for (int64_t i = 0; i < count; ++i) {
    Tensor<float> c = sampler.Next();
    std::copy_n(c.data(), each, set.data() + i * each);
  }
  return set;
}

Tensor<float> GatherBatch(const Tensor<float>& set,
                          const std::vector<int64_t>& indices) {
  Shape shape = set.shape();
  const int64_t each = set.numel() / shape[0];
  shape[0] = static_cast<int64_t>(indices.size());
  Tensor<float> batch(shape);
  for (size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= set.dim(0)) {
      throw DimensionError("batch index out of range");
    }
    std::copy_n(set.data() + indices[i] * each, each, batch.data() + i * each);
  }
  return batch;
}

StepStats TrainStep(const CompressionModel<float>& model, Adam& opt,
                    const Tensor<float>& batch, double lambda, Rng& rng) {
  Var<float> x(batch);
  ModelOutput<float> out = model.Forward(x, QuantMode::kNoise, &rng);
  RdTerms<float> terms = RdLoss(x, out.x_hat, out.y_bits, out.z_bits, lambda);
  if (!std::isfinite(terms.value)) {
    throw Error("non-finite training loss");
  }
  terms.loss.Backward();
  opt.Step();
  return {terms.value, terms.rate, terms.distortion};
}

EvalStats Evaluate(const CompressionModel<float>& model,
                   const Tensor<float>& set, double lambda, int64_t batch) {
  NoGradGuard no_grad;
  const int64_t n = set.dim(0);
  double rate = 0, dist = 0;
  for (int64_t b = 0; b < n; b += batch) {
    std::vector<int64_t> idx;
    for (int64_t i = b; i < std::min(n, b + batch); ++i) idx.push_back(i);
    Var<float> x(GatherBatch(set, idx));
    ModelOutput<float> out = model.Forward(x, QuantMode::kRound);
    RdTerms<float> t = RdLoss(x, out.x_hat, out.y_bits, out.z_bits, lambda);
    rate += t.rate * idx.size();
    dist += t.distortion * idx.size();
  }
  EvalStats s;
  s.rate = rate / n;
  s.distortion = dist / n;
  s.loss = s.rate + lambda * s.distortion;
  s.psnr = PsnrFromDistortion(s.distortion);
  return s;
}

void SaveCheckpoint(const std::string& path, CompressionModel<float>& model,
                    const TrainConfig& train, int64_t step, Adam* opt) {
  const std::string tmp = path + ".tmp";
  {
    BinaryWriter w(tmp);
    for (char c : kCheckpointMagic) w.Put(c);
    w.Put<uint32_t>(kCheckpointVersion);
    w.PutString(model.config.Canonical());
    w.PutString(train.Canonical());
    w.Put<int64_t>(step);
    w.Put<uint32_t>(model.Fingerprint());
    std::vector<std::pair<std::string, Var<float>>> params;
    model.Visit([&](const std::string& name, Var<float>& v) {
      params.emplace_back(name, v);
    });
    w.Put<uint64_t>(params.size());
    for (const auto& [name, v] : params) {
      w.PutString(name);
      w.PutTensor(v.value());
    }
    w.Put<uint8_t>(opt != nullptr);
    if (opt) {
      w.Put<double>(opt->learning_rate());
      w.Put<int64_t>(opt->steps());
      for (size_t i = 0; i < params.size(); ++i) {
        w.PutTensor(opt->first_moments()[i]);
        w.PutTensor(opt->second_moments()[i]);
      }
    }
    w.Close();
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint ReadCheckpoint(const std::string& path) {
  BinaryReader r(path);
  char magic[8];
  r.Read(magic, 8);
  if (std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw IncompatibleModelError(path + " is not a checkpoint");
  }
  const uint32_t version = r.Get<uint32_t>();
  if (version != kCheckpointVersion) {
    throw IncompatibleModelError("unsupported checkpoint version " +
                                 std::to_string(version));
  }
  Checkpoint c;
  for (const auto& [k, v] : ParseKeyValues(r.GetString())) c.model_config.Set(k, v);
  for (const auto& [k, v] : ParseKeyValues(r.GetString())) c.train_config.Set(k, v);
  c.step = r.Get<int64_t>();
  c.fingerprint = r.Get<uint32_t>();
  const uint64_t count = r.Get<uint64_t>();
  if (count > 100000) r.Fail();
  for (uint64_t i = 0; i < count; ++i) {
    std::string name = r.GetString();
    c.params.emplace_back(std::move(name), r.GetTensor());
  }
  if (r.Get<uint8_t>()) {
    c.learning_rate = r.Get<double>();
    c.adam_steps = r.Get<int64_t>();
    for (uint64_t i = 0; i < count; ++i) {
      c.adam_m.push_back(r.GetTensor());
      c.adam_v.push_back(r.GetTensor());
    }
  }
  return c;
}

CompressionModel<float> ModelFromCheckpoint(const Checkpoint& ckpt) {
  CompressionModel<float> model(ckpt.model_config, 0);
  size_t i = 0;
  model.Visit([&](const std::string& name, Var<float>& v) {
    if (i >= ckpt.params.size() || ckpt.params[i].first != name ||
        ckpt.params[i].second.shape() != v.shape()) {
      throw IncompatibleModelError("checkpoint parameter mismatch at " + name);
    }
    v.mutable_value() = ckpt.params[i].second;
    ++i;
  });
  if (i != ckpt.params.size()) {
    throw IncompatibleModelError("checkpoint has extra parameters");
  }
  if (model.Fingerprint() != ckpt.fingerprint) {
    throw IncompatibleModelError("checkpoint fingerprint mismatch");
  }
  return model;
}

void RestoreOptimizer(const Checkpoint& ckpt, Adam* opt) {
  if (ckpt.adam_m.empty()) return;
  if (ckpt.adam_m.size() != opt->first_moments().size()) {
    throw IncompatibleModelError("optimizer state does not match the model");
  }
  opt->first_moments() = ckpt.adam_m;
  opt->second_moments() = ckpt.adam_v;
  opt->set_steps(ckpt.adam_steps);
  opt->set_learning_rate(ckpt.learning_rate);
}

std::string LogRecord::ToJson() const {
  nlohmann::json j;
  j["step"] = step;
  j["L"] = loss;
  j["R"] = rate;
  j["D"] = distortion;
  j["lr"] = lr;
  return j.dump();
}

TrainResult Train(CompressionModel<float>& model, const Tensor<float>& crops,
                  const Tensor<float>& eval_set, const TrainOptions& options,
                  Adam* resume, int64_t start_step) {
  const TrainConfig& cfg = options.config;
  cfg.Validate();
  if (crops.rank() != 4 || crops.dim(2) != cfg.crop_size) {
    throw DimensionError("training crops must be [N, 3, crop, crop]");
  }
  model.config.lambda_index = LambdaIndex(cfg.lambda);

  Adam local;
  if (!resume) {
    local = Adam(model.Parameters(), AdamOptions{cfg.learning_rate});
  }
  Adam& opt = resume ? *resume : local;
  PlateauSchedule schedule(opt.learning_rate(), cfg.plateau_patience,
                           cfg.plateau_factor, cfg.min_learning_rate);
  Rng rng(cfg.seed + static_cast<uint64_t>(start_step));
  std::uniform_int_distribution<int64_t> pick(0, crops.dim(0) - 1);

  TrainResult result;
  StepStats window;
  int64_t in_window = 0;
  for (int64_t step = start_step + 1; step <= cfg.max_steps; ++step) {
    std::vector<int64_t> idx(cfg.batch_size);
    for (auto& i : idx) i = pick(rng);
    const StepStats s =
        TrainStep(model, opt, GatherBatch(crops, idx), cfg.lambda, rng);
    result.steps.push_back(s);
    window.loss += s.loss;
    window.rate += s.rate;
    window.distortion += s.distortion;
    ++in_window;
    if (options.log && (step % options.log_period == 0 || step == cfg.max_steps)) {
      LogRecord rec{step, window.loss / in_window, window.rate / in_window,
                    window.distortion / in_window, opt.learning_rate()};
      *options.log << rec.ToJson() << "\n" << std::flush;
      window = StepStats();
      in_window = 0;
    }
    if (step % cfg.eval_period == 0 || step == cfg.max_steps) {
      const EvalStats e = Evaluate(model, eval_set, cfg.lambda, 2);
      result.evals.emplace_back(step, e);
      if (options.on_eval) options.on_eval(step, e);
      opt.set_learning_rate(schedule.Update(e.loss));
      if (!options.checkpoint_path.empty()) {
        SaveCheckpoint(options.checkpoint_path, model, cfg, step, &opt);
      }
    }
  }
  return result;
}

}  // namespace sch
