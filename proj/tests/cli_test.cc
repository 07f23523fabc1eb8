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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "sch/analysis.h"
#include "sch/cli.h"
#include "sch/image_io.h"
#include "sch/training.h"

namespace sch {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code;
  std::string out, err;
};

CliRun Cli(std::vector<std::string> args) {
  args.insert(args.begin(), "sch");
  std::ostringstream out, err;
  const int code = RunCli(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(fs::temp_directory_path() / "sch_cli_test");
    fs::remove_all(*dir_);
    fs::create_directories(*dir_);
    CompressionModel<float> model(ModelConfig::Toy(), 21);
    SaveCheckpoint(Path("model.ckpt"), model, TrainConfig(), 0, nullptr);
    ModelConfig other = ModelConfig::Toy();
    other.n = 16;
    CompressionModel<float> foreign(other, 22);
    SaveCheckpoint(Path("other.ckpt"), foreign, TrainConfig(), 0, nullptr);
    Image img = ReadPng(std::string(SCH_TESTDATA) + "/test/rocket.png");
    Image crop;
    crop.width = 80;
    crop.height = 72;
    for (int y = 0; y < 72; ++y) {
      for (int x = 0; x < 80; ++x) {
        for (int c = 0; c < 3; ++c) crop.rgb.push_back(img.at(y + 100, x + 150, c));
      }
    }
    WritePng(Path("in.png"), crop);
  }
  static void TearDownTestSuite() {
    fs::remove_all(*dir_);
    delete dir_;
  }
  static std::string Path(const std::string& name) { return (*dir_ / name).string(); }
  static fs::path* dir_;
};

fs::path* CliTest::dir_ = nullptr;

TEST_F(CliTest, EncodeDecodeMatchesEncoderReconstruction) {
  CliRun enc = Cli({"encode", Path("in.png"), "-m", Path("model.ckpt"), "-o", Path("a.sch"),
                 "--recon", Path("recon.png")});
  ASSERT_EQ(enc.code, 0) << enc.err;
  nlohmann::json j = nlohmann::json::parse(enc.out);
  EXPECT_EQ(j["bytes"].get<size_t>(), fs::file_size(Path("a.sch")));
  EXPECT_DOUBLE_EQ(j["bpp"].get<double>(), j["bytes"].get<double>() * 8 / (80 * 72));
  CliRun dec = Cli({"decode", Path("a.sch"), "-m", Path("model.ckpt"), "-o", Path("dec.png")});
  ASSERT_EQ(dec.code, 0) << dec.err;
  EXPECT_TRUE(ReadPng(Path("dec.png")) == ReadPng(Path("recon.png")));
  EXPECT_NEAR(Psnr(ReadPng(Path("in.png")), ReadPng(Path("dec.png"))),
              j["psnr"].get<double>(), 1e-9);
}

TEST_F(CliTest, ModelDirectoryFromEnvironment) {
  setenv(kModelDirEnv, dir_->c_str(), 1);
  CliRun enc = Cli({"encode", Path("in.png"), "-o", Path("env.sch")});
  unsetenv(kModelDirEnv);
  EXPECT_EQ(enc.code, 0) << enc.err;
}

TEST_F(CliTest, BdRateOnIdenticalCurvesIsZero) {
  RdCurve c = {{0.1, 28}, {0.2, 31}, {0.4, 34}, {0.8, 37}};
  WriteRdCurve(Path("anchor.csv"), c);
  WriteRdCurve(Path("same.json"), c);
  CliRun r = Cli({"bdrate", Path("anchor.csv"), Path("same.json")});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "BD-rate: 0.00%\n");
  for (auto& p : c) p.bpp *= 0.9;
  WriteRdCurve(Path("better.csv"), c);
  r = Cli({"bdrate", Path("anchor.csv"), Path("better.csv"), "--pchip", "--plot", Path("p.png")});
  EXPECT_EQ(r.out, "BD-rate: -10.00%\n");
  EXPECT_TRUE(fs::exists(Path("p.png")));
}

TEST_F(CliTest, FailuresHaveDistinctCodesAndJsonErrors) {
  std::set<int> codes;
  auto expect = [&](const CliRun& r, int code, const std::string& kind) {
    EXPECT_EQ(r.code, code) << r.err;
    codes.insert(r.code);
    std::istringstream lines(r.err);
    std::string line, last;
    while (std::getline(lines, line)) last = line;
    nlohmann::json j = nlohmann::json::parse(last);
    EXPECT_EQ(j["error"], kind);
    EXPECT_EQ(j["code"], code);
  };
  expect(Cli({"encode", Path("missing.png"), "-m", Path("model.ckpt"), "-o", Path("x.sch")}),
         kExitInput, "input");
  expect(Cli({"frobnicate"}), kExitUsage, "usage");

  ASSERT_EQ(Cli({"encode", Path("in.png"), "-m", Path("model.ckpt"), "-o", Path("b.sch")}).code, 0);
  expect(Cli({"decode", Path("b.sch"), "-m", Path("other.ckpt"), "-o", Path("x.png")}),
         kExitIncompatible, "incompatible");

  std::ifstream in(Path("b.sch"), std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  std::ofstream(Path("cut.sch"), std::ios::binary) << bytes.substr(0, bytes.size() - 5);
  expect(Cli({"decode", Path("cut.sch"), "-m", Path("model.ckpt"), "-o", Path("x.png")}),
         kExitDecode, "decode");
  bytes[0] = 'Z';
  std::ofstream(Path("magic.sch"), std::ios::binary) << bytes;
  expect(Cli({"decode", Path("magic.sch"), "-m", Path("model.ckpt"), "-o", Path("x.png")}),
         kExitDecode, "decode");
  EXPECT_FALSE(fs::exists(Path("x.png")));

  WriteRdCurve(Path("short.csv"), {{0.1, 28}, {0.2, 31}});
  expect(Cli({"bdrate", Path("short.csv"), Path("short.csv")}), kExitMetric, "metric");
  expect(Cli({"erf", Path("in.png"), "-m", Path("model.ckpt"), "--point", "99,99"}),
         kExitDimension, "dimension");
  EXPECT_EQ(codes.size(), 6u);
}

TEST_F(CliTest, ErfAndAttentionDump) {
  CliRun r = Cli({"erf", Path("in.png"), "-m", Path("model.ckpt"), "--tap", "channel", "-o",
               Path("erf.png")});
  ASSERT_EQ(r.code, 0) << r.err;
  nlohmann::json j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["tap"], "channel");
  EXPECT_GT(j["area"].get<int>(), 0);
  EXPECT_EQ(ReadPng(Path("erf.png")).width, 128);  // padded input

  r = Cli({"attn-dump", Path("in.png"), "-m", Path("model.ckpt"), "-o", Path("maps")});
  ASSERT_EQ(r.code, 0) << r.err;
  nlohmann::json index = nlohmann::json::parse(std::ifstream(Path("maps") + "/maps.json"));
  const int count = index["windows"].get<int>() * index["heads"].get<int>();
  EXPECT_EQ(index["maps"].size(), size_t(count));
  EXPECT_TRUE(fs::exists(Path("maps") + "/w0000_h0.png"));
}

TEST_F(CliTest, EvalWritesCurveAndTable) {
  fs::create_directories(Path("evaldir"));
  fs::copy_file(Path("in.png"), Path("evaldir") + "/in.png", fs::copy_options::overwrite_existing);
  CliRun r = Cli({"eval", Path("evaldir"), "-m", Path("model.ckpt"), "--csv", Path("t.csv"),
               "--curve", Path("curve.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("in.png"), std::string::npos);
  EXPECT_EQ(r.out.find("MISMATCH"), std::string::npos);
  EXPECT_EQ(ReadRdCurve(Path("curve.json")).size(), 1u);
  EXPECT_TRUE(fs::exists(Path("t.csv")));
}

TEST_F(CliTest, TrainOverfitSmokeAndConfigEcho) {
  fs::create_directories(Path("train"));
  std::vector<std::string> pngs = ListPngs(std::string(SCH_TESTDATA) + "/train");
  for (size_t i = 0; i < 2; ++i) {
    fs::copy_file(pngs[i], Path("train") + "/" + fs::path(pngs[i]).filename().string(),
                  fs::copy_options::overwrite_existing);
  }
  CliRun r = Cli({"train", "--config", std::string(SCH_TESTDATA) + "/../configs/toy.cfg",
               "--train-dir", Path("train"), "--crops", "16", "--eval-crops", "2",
               "--max-steps", "200", "--batch-size", "4", "--crop-size", "64",
               "--eval-period", "100", "--set", "model.slices=2", "--seed", "3",
               "-o", Path("trained.ckpt"), "--log", Path("log.ndjson")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("config: model.slices=2"), std::string::npos);
  EXPECT_NE(r.err.find("config: train.crop_size=64"), std::string::npos);
  EXPECT_NE(r.err.find("config: train.seed=3"), std::string::npos);
  std::ifstream log(Path("log.ndjson"));
  std::string line;
  std::vector<double> losses;
  while (std::getline(log, line)) losses.push_back(nlohmann::json::parse(line)["L"]);
  ASSERT_GE(losses.size(), 2u);
  EXPECT_LT(losses.back(), losses.front());
  Checkpoint ck = ReadCheckpoint(Path("trained.ckpt"));
  EXPECT_EQ(ck.step, 200);
  EXPECT_EQ(ck.model_config.slices, 2);

  CliRun bad = Cli({"train", "--train-dir", Path("train"), "--set", "model.bogus=1"});
  EXPECT_EQ(bad.code, kExitUsage);
}

TEST(CliBinary, RoundTripThroughProcess) {
  const fs::path dir = fs::temp_directory_path() / "sch_cli_binary";
  fs::create_directories(dir);
  CompressionModel<float> model(ModelConfig::Toy(), 23);
  SaveCheckpoint((dir / "m.ckpt").string(), model, TrainConfig(), 0, nullptr);
  const std::string cli = SCH_CLI_PATH;
  const std::string img = std::string(SCH_TESTDATA) + "/test/coins.png";
  const std::string d = dir.string();
  auto sh = [](const std::string& cmd) {
    const int s = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  EXPECT_EQ(sh(cli + " encode " + img + " -m " + d + "/m.ckpt -o " + d + "/c.sch --recon " +
               d + "/r.png"), 0);
  EXPECT_EQ(sh(cli + " decode " + d + "/c.sch -m " + d + "/m.ckpt -o " + d + "/o.png"), 0);
  EXPECT_TRUE(ReadPng(d + "/o.png") == ReadPng(d + "/r.png"));
  EXPECT_EQ(sh(cli + " decode " + img + " -m " + d + "/m.ckpt -o " + d + "/x.png"), kExitDecode);
  EXPECT_EQ(sh(cli + " --help"), 0);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace sch
