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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include <sstream>

#include "json.hpp"
#include "sch/errors.h"
#include "sch/training.h"
#include "test_util.h"

namespace sch {
namespace {

namespace fs = std::filesystem;

Var<double> Full(Shape s, double v, bool grad = false) {
  return Var<double>(Tensor<double>(s, v), grad);
}

TEST(RdLoss, WorkedExample) {
  // 16 pixels, 8 bits in total -> 0.5 bpp; 255 * (10/255) error -> D = 100.
  Var<double> x = Full({1, 3, 4, 4}, 0.0);
  Var<double> x_hat = Full({1, 3, 4, 4}, 10.0 / 255.0);
  RdTerms<double> t = RdLoss(x, x_hat, Full({1}, 6.0), Full({1}, 2.0), 0.0025);
  EXPECT_NEAR(t.rate, 0.5, 1e-15);
  EXPECT_NEAR(t.distortion, 100.0, 1e-9);
  EXPECT_NEAR(t.value, 0.75, 1e-12);
  EXPECT_NEAR(t.loss.value()[0], 0.75, 1e-12);
  EXPECT_EQ(t.value - 0.0025 * t.distortion - t.rate, 0.0);
}

TEST(RdLoss, ZeroDistortionLeavesRate) {
  Rng rng(1);
  Var<double> x = testing::RandomVar<double>({2, 3, 8, 8}, rng, false, 0, 1);
  RdTerms<double> t = RdLoss(x, x, Full({1}, 100.0), Full({1}, 28.0), 0.05);
  EXPECT_EQ(t.distortion, 0.0);
  EXPECT_DOUBLE_EQ(t.value, 128.0 / 128.0);
  EXPECT_THROW(RdLoss(x, Full({2, 3, 8, 4}, 0), Full({1}, 0), Full({1}, 0), 0.1),
               DimensionError);
}

TEST(RdLoss, DecompositionIsExact) {
  Rng rng(2);
  for (double lambda : {0.0025, 0.0067, 0.013, 0.025, 0.05}) {
    Var<double> x = testing::RandomVar<double>({1, 3, 5, 7}, rng, false, 0, 1);
    Var<double> x_hat = testing::RandomVar<double>({1, 3, 5, 7}, rng, false, 0, 1);
    RdTerms<double> t = RdLoss(x, x_hat, Full({1}, 33.3), Full({1}, 1.7), lambda);
    // Reported L is assembled from the reported parts with no extra rounding.
    EXPECT_EQ(t.value, t.rate + lambda * t.distortion);
    EXPECT_NEAR(t.value - lambda * t.distortion - t.rate, 0.0, 1e-13);
  }
}

TEST(RdLoss, GradientsMatchFiniteDifferences) {
  Rng rng(3);
  Var<double> x = testing::RandomVar<double>({1, 3, 4, 4}, rng, false, 0, 1);
  Var<double> x_hat = testing::RandomVar<double>({1, 3, 4, 4}, rng, true, 0, 1);
  Var<double> yb = Full({1}, 20.0, true), zb = Full({1}, 3.0, true);
  auto r = testing::GradCheck([&] { return RdLoss(x, x_hat, yb, zb, 0.013).loss; },
                              {{"x_hat", x_hat}, {"y_bits", yb}, {"z_bits", zb}}, 24);
  EXPECT_LE(r.max_relative_error, 1e-4) << r.worst;
}

TEST(Adam, MatchesClosedFormFirstSteps) {
  Var<float> p(Tensor<float>({2}, 1.0f), true);
  Adam opt({p}, AdamOptions{0.1});
  const double g1[2] = {0.5, -2.0}, g2[2] = {0.25, 1.0};
  double ref[2] = {1.0, 1.0}, m[2] = {0, 0}, v[2] = {0, 0};
  for (int step = 1; step <= 2; ++step) {
    const double* g = step == 1 ? g1 : g2;
    for (int i = 0; i < 2; ++i) {
      p.mutable_grad()[i] = static_cast<float>(g[i]);
      m[i] = 0.9 * m[i] + 0.1 * g[i];
      v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(0.9, step));
      const double vh = v[i] / (1 - std::pow(0.999, step));
      ref[i] -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
    }
    opt.Step();
    for (int i = 0; i < 2; ++i) {
      EXPECT_NEAR(p.value()[i], ref[i], 1e-6);
      EXPECT_EQ(p.grad()[i], 0.0f);
    }
  }
  EXPECT_EQ(opt.steps(), 2);
}

TEST(Plateau, DecaysAfterPatienceFlatEvals) {
  PlateauSchedule s(1e-4, 5, 0.3, 1e-7);
  EXPECT_DOUBLE_EQ(s.Update(1.0), 1e-4);
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(s.Update(1.0), 1e-4);
  EXPECT_NEAR(s.Update(1.0), 3e-5, 1e-18);
  EXPECT_EQ(s.bad_evals(), 0);
}

TEST(Plateau, ImprovingLossesKeepRate) {
  PlateauSchedule s(1e-4, 5, 0.3, 1e-7);
  for (int i = 0; i < 50; ++i) EXPECT_DOUBLE_EQ(s.Update(10.0 - 0.1 * i), 1e-4);
}

TEST(Plateau, RateNeverIncreasesNorDropsBelowFloor) {
  PlateauSchedule s(1e-4, 2, 0.3, 1e-7);
  Rng rng(4);
  std::uniform_real_distribution<double> loss(0.5, 1.5);
  double prev = s.learning_rate();
  for (int i = 0; i < 500; ++i) {
    const double lr = s.Update(loss(rng));
    EXPECT_LE(lr, prev);
    EXPECT_GE(lr, 1e-7);
    prev = lr;
  }
  EXPECT_DOUBLE_EQ(prev, 1e-7);
}

std::vector<Image> TrainImages(int64_t crop) {
  std::vector<std::string> paths = ListPngs(std::string(SCH_TESTDATA) + "/train");
  paths.resize(3);
  return LoadImages(paths, crop, nullptr);
}

TEST(Crops, ShapeRangeAndDeterminism) {
  std::vector<Image> images = TrainImages(256);
  CropSampler a(&images, 256, 9), b(&images, 256, 9), c(&images, 256, 10);
  bool any_differs = false;
  for (int i = 0; i < 20; ++i) {
    CropSampler::Coords ca = a.NextCoords(), cb = b.NextCoords(), cc = c.NextCoords();
    EXPECT_EQ(ca.image, cb.image);
    EXPECT_EQ(ca.y, cb.y);
    EXPECT_EQ(ca.x, cb.x);
    any_differs |= ca.y != cc.y || ca.x != cc.x || ca.image != cc.image;
    EXPECT_LE(ca.y + 256, images[ca.image].height);
    EXPECT_LE(ca.x + 256, images[ca.image].width);
    Tensor<float> t = a.Extract(ca);
    EXPECT_EQ(t.shape(), (Shape{3, 256, 256}));
    for (float v : t.values()) ASSERT_TRUE(v >= 0.0f && v <= 1.0f);
    EXPECT_FLOAT_EQ(t[0], images[ca.image].at(ca.y, ca.x, 0) / 255.0f);
  }
  EXPECT_TRUE(any_differs);
  Tensor<float> set = MakeCropSet(images, 4, 64, 3);
  EXPECT_EQ(set.shape(), (Shape{4, 3, 64, 64}));
  EXPECT_EQ(MakeCropSet(images, 4, 64, 3).storage(), set.storage());
}

TEST(Crops, SmallImagesAreSkippedWithWarning) {
  const fs::path dir = fs::temp_directory_path() / "sch_small_images";
  fs::create_directories(dir);
  Image tiny;
  tiny.width = 20;
  tiny.height = 300;
  tiny.rgb.assign(20 * 300 * 3, 128);
  WritePng((dir / "tiny.png").string(), tiny);
  std::vector<std::string> paths = {(dir / "tiny.png").string(),
                                    ListPngs(std::string(SCH_TESTDATA) + "/train")[0]};
  std::ostringstream log;
  std::vector<Image> images = LoadImages(paths, 256, &log);
  EXPECT_EQ(images.size(), 1u);
  EXPECT_NE(log.str().find("warning"), std::string::npos);
  EXPECT_NE(log.str().find("tiny.png"), std::string::npos);
  fs::remove_all(dir);
}

ModelConfig Small() {
  ModelConfig c = ModelConfig::Toy();
  c.n = 16;
  c.m = 16;
  c.z_channels = 8;
  c.slices = 2;
  c.entropy_width = 8;
  return c;
}

TEST(TrainStep, SeededLossesReproduce) {
  std::vector<Image> images = TrainImages(64);
  Tensor<float> set = MakeCropSet(images, 4, 64, 1);
  std::vector<double> runs[2];
  for (auto& losses : runs) {
    CompressionModel<float> model(Small(), 5);
    Adam opt(model.Parameters(), AdamOptions{1e-3});
    Rng rng(77);
    for (int i = 0; i < 3; ++i) {
      StepStats s = TrainStep(model, opt, GatherBatch(set, {i, (i + 1) % 4}), 0.013, rng);
      ASSERT_TRUE(std::isfinite(s.loss));
      EXPECT_NEAR(s.loss, s.rate + 0.013 * s.distortion, 1e-9 * s.loss);
      losses.push_back(s.loss);
    }
  }
  EXPECT_EQ(runs[0], runs[1]);
}

TEST(TrainStep, OverfitsSixteenCrops) {
  std::vector<Image> images = TrainImages(64);
  Tensor<float> set = MakeCropSet(images, 16, 64, 2);
  CompressionModel<float> model(ModelConfig::Toy(), 6);
  Adam opt(model.Parameters(), AdamOptions{1e-4});
  Rng rng(8);
  std::vector<double> losses;
  for (int step = 0; step < 200; ++step) {
    std::vector<int64_t> idx;
    for (int k = 0; k < 4; ++k) idx.push_back((4 * step + k) % 16);
    losses.push_back(TrainStep(model, opt, GatherBatch(set, idx), 0.013, rng).loss);
  }
  double tail = 0;
  for (int i = 190; i < 200; ++i) tail += losses[i] / 10;
  EXPECT_LE(tail, 0.7 * losses[0]) << "first " << losses[0] << " last " << tail;
}

TEST(Checkpoint, RoundTripIsBitExact) {
  std::vector<Image> images = TrainImages(64);
  Tensor<float> set = MakeCropSet(images, 2, 64, 4);
  CompressionModel<float> model(Small(), 9);
  Adam opt(model.Parameters(), AdamOptions{3e-4});
  Rng rng(10);
  TrainStep(model, opt, set, 0.013, rng);
  TrainConfig train;
  train.crop_size = 64;
  const std::string path = (fs::temp_directory_path() / "sch_ckpt_test.ckpt").string();
  SaveCheckpoint(path, model, train, 1, &opt);

  Checkpoint ck = ReadCheckpoint(path);
  EXPECT_EQ(ck.step, 1);
  EXPECT_EQ(ck.fingerprint, model.Fingerprint());
  EXPECT_EQ(ck.train_config.Canonical(), train.Canonical());
  CompressionModel<float> loaded = ModelFromCheckpoint(ck);
  EXPECT_EQ(loaded.Fingerprint(), model.Fingerprint());
  {
    NoGradGuard guard;
    ModelOutput<float> a = model.Forward(Var<float>(set), QuantMode::kRound);
    ModelOutput<float> b = loaded.Forward(Var<float>(set), QuantMode::kRound);
    EXPECT_EQ(a.x_hat.value().storage(), b.x_hat.value().storage());
    EXPECT_EQ(a.y_bits.value()[0], b.y_bits.value()[0]);
    EXPECT_EQ(a.z_bits.value()[0], b.z_bits.value()[0]);
  }
  Adam restored(loaded.Parameters(), AdamOptions{});
  RestoreOptimizer(ck, &restored);
  EXPECT_EQ(restored.steps(), 1);
  EXPECT_DOUBLE_EQ(restored.learning_rate(), 3e-4);
  ASSERT_EQ(restored.first_moments().size(), opt.first_moments().size());
  for (size_t i = 0; i < opt.first_moments().size(); ++i) {
    EXPECT_EQ(restored.first_moments()[i].storage(), opt.first_moments()[i].storage());
    EXPECT_EQ(restored.second_moments()[i].storage(), opt.second_moments()[i].storage());
  }

  // Anything but a checkpoint is refused.
  { std::ofstream(path, std::ios::binary) << "not a checkpoint"; }
  EXPECT_THROW(ReadCheckpoint(path), IncompatibleModelError);
  fs::remove(path);
}

TEST(Train, LogsEvaluatesAndCheckpoints) {
  std::vector<Image> images = TrainImages(64);
  Tensor<float> crops = MakeCropSet(images, 8, 64, 5);
  Tensor<float> eval = MakeCropSet(images, 2, 64, 6);
  CompressionModel<float> model(Small(), 11);
  TrainOptions opts;
  opts.config.crop_size = 64;
  opts.config.batch_size = 2;
  opts.config.max_steps = 12;
  opts.config.eval_period = 5;
  opts.config.lambda = 0.0067;
  opts.log_period = 4;
  std::ostringstream log;
  opts.log = &log;
  opts.checkpoint_path = (fs::temp_directory_path() / "sch_train_test.ckpt").string();
  int callbacks = 0;
  opts.on_eval = [&](int64_t, const EvalStats&) { ++callbacks; };
  TrainResult r = Train(model, crops, eval, opts);
  EXPECT_EQ(r.steps.size(), 12u);
  ASSERT_EQ(r.evals.size(), 3u);  // steps 5, 10, 12
  EXPECT_EQ(r.evals.back().first, 12);
  EXPECT_EQ(callbacks, 3);
  EXPECT_EQ(model.config.lambda_index, 2);
  std::istringstream lines(log.str());
  std::string line;
  std::vector<int64_t> steps;
  while (std::getline(lines, line)) {
    nlohmann::json j = nlohmann::json::parse(line);
    for (const char* k : {"step", "L", "R", "D", "lr"}) EXPECT_TRUE(j.contains(k)) << k;
    steps.push_back(j["step"]);
  }
  EXPECT_EQ(steps, (std::vector<int64_t>{4, 8, 12}));
  EXPECT_EQ(ReadCheckpoint(opts.checkpoint_path).step, 12);
  fs::remove(opts.checkpoint_path);
}

}  // namespace
}  // namespace sch
