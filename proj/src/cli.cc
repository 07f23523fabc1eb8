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

#include "sch/cli.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sch/analysis.h"
#include "sch/errors.h"
#include "sch/training.h"

namespace sch {
namespace {

namespace fs = std::filesystem;

std::string ReadText(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<uint8_t> ReadBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void WriteBytes(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  if (!out) throw InputError("cannot write " + path);
}

std::string ResolveModelPath(const std::string& flag) {
  if (!flag.empty()) return flag;
  const char* dir = std::getenv(kModelDirEnv);
  if (dir == nullptr || *dir == '\0') {
    throw ConfigError(std::string("no model given: pass -m or set ") +
                      kModelDirEnv);
  }
  return (fs::path(dir) / "model.ckpt").string();
}

void EchoConfig(std::ostream& log, const ModelConfig& m, const TrainConfig* t) {
  std::istringstream ms(m.Canonical());
  for (std::string line; std::getline(ms, line);) log << "config: model." << line << "\n";
  if (t) {
    std::istringstream ts(t->Canonical());
    for (std::string line; std::getline(ts, line);) log << "config: train." << line << "\n";
  }
}

CompressionModel<float> LoadModel(const std::string& flag, std::ostream& log) {
  const std::string path = ResolveModelPath(flag);
  CompressionModel<float> model = ModelFromCheckpoint(ReadCheckpoint(path));
  log << "model: " << path << "\n";
  EchoConfig(log, model.config, nullptr);
  return model;
}

// Reflect-pads an image to the analysis transform's size multiple.
Tensor<float> PaddedInput(const Image& im, const ModelConfig& cfg) {
  const int64_t mult = cfg.pad_multiple();
  return ReflectPad(ImageToTensor(im), (im.height + mult - 1) / mult * mult,
                    (im.width + mult - 1) / mult * mult);
}

int CodeFor(const std::exception& e, std::string* kind) {
  if (dynamic_cast<const DecodeError*>(&e)) { *kind = "decode"; return kExitDecode; }
  if (dynamic_cast<const IncompatibleModelError*>(&e)) { *kind = "incompatible"; return kExitIncompatible; }
  if (dynamic_cast<const InputError*>(&e)) { *kind = "input"; return kExitInput; }
  if (dynamic_cast<const ConfigError*>(&e)) { *kind = "config"; return kExitUsage; }
  if (dynamic_cast<const MetricError*>(&e)) { *kind = "metric"; return kExitMetric; }
  if (dynamic_cast<const DimensionError*>(&e)) { *kind = "dimension"; return kExitDimension; }
  if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) { *kind = "input"; return kExitInput; }
  *kind = "internal";
  return kExitFailure;
}

void ReportError(std::ostream& err, const std::string& kind, int code,
                 const std::string& message) {
  nlohmann::json j;
  j["error"] = kind;
  j["code"] = code;
  j["message"] = message;
  err << j.dump() << "\n";
}

struct TrainArgs {
  std::string config_file;
  std::vector<std::string> overrides;
  std::optional<int64_t> max_steps, batch_size, crop_size, eval_period;
  std::optional<double> lambda, lr;
  std::optional<uint64_t> seed;
  std::string train_dir, eval_dir, output, log_path, resume;
  int64_t crops = 1000;
  int64_t eval_crops = 8;
};

int RunTrain(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  ModelConfig model_cfg;
  TrainConfig train_cfg;
  Checkpoint resumed;
  if (!a.resume.empty()) {
    resumed = ReadCheckpoint(a.resume);
    model_cfg = resumed.model_config;
    train_cfg = resumed.train_config;
  }
  if (!a.config_file.empty()) {
    ApplyKeyValues(ParseKeyValues(ReadText(a.config_file)), &model_cfg, &train_cfg);
  }
  std::map<std::string, std::string> kv;
  for (const auto& o : a.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got " + o);
    kv[o.substr(0, eq)] = o.substr(eq + 1);
  }
  ApplyKeyValues(kv, &model_cfg, &train_cfg);
  if (a.max_steps) train_cfg.max_steps = *a.max_steps;
  if (a.batch_size) train_cfg.batch_size = *a.batch_size;
  if (a.crop_size) train_cfg.crop_size = *a.crop_size;
  if (a.eval_period) train_cfg.eval_period = *a.eval_period;
  if (a.lambda) train_cfg.lambda = *a.lambda;
  if (a.lr) train_cfg.learning_rate = *a.lr;
  if (a.seed) train_cfg.seed = *a.seed;
  model_cfg.Validate();
  train_cfg.Validate();
  EchoConfig(err, model_cfg, &train_cfg);

  const std::string output = a.output.empty() ? ResolveModelPath("") : a.output;
  if (fs::path(output).has_parent_path()) fs::create_directories(fs::path(output).parent_path());

  const std::vector<Image> train_images =
      LoadImages(ListPngs(a.train_dir), train_cfg.crop_size, &err);
  const Tensor<float> crops =
      MakeCropSet(train_images, a.crops, train_cfg.crop_size, train_cfg.seed);
  Tensor<float> eval_set;
  if (!a.eval_dir.empty()) {
    const std::vector<Image> eval_images =
        LoadImages(ListPngs(a.eval_dir), train_cfg.crop_size, &err);
    eval_set = MakeCropSet(eval_images, a.eval_crops, train_cfg.crop_size,
                           train_cfg.seed + 7919);
  } else {
    eval_set = MakeCropSet(train_images, a.eval_crops, train_cfg.crop_size,
                           train_cfg.seed + 7919);
  }

  CompressionModel<float> model = a.resume.empty()
                                      ? CompressionModel<float>(model_cfg, train_cfg.seed)
                                      : ModelFromCheckpoint(resumed);
  model.config = model_cfg;
  Adam opt(model.Parameters(), AdamOptions{train_cfg.learning_rate});
  if (!a.resume.empty()) RestoreOptimizer(resumed, &opt);

  std::ofstream log_file;
  if (!a.log_path.empty()) {
    log_file.open(a.log_path);
    if (!log_file) throw InputError("cannot write " + a.log_path);
  }
  TrainOptions options;
  options.config = train_cfg;
  options.log = a.log_path.empty() ? &out : &log_file;
  options.checkpoint_path = output;
  options.on_eval = [&](int64_t step, const EvalStats& e) {
    err << "eval: step=" << step << " L=" << e.loss << " bpp=" << e.rate
        << " psnr=" << e.psnr << "\n";
  };
  Train(model, crops, eval_set, options, &opt, a.resume.empty() ? 0 : resumed.step);
  SaveCheckpoint(output, model, train_cfg, train_cfg.max_steps, &opt);
  err << "saved: " << output << "\n";
  return kExitOk;
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"Learned image codec with space-channel hybrid transforms", "sch"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a model on PNG crops");
  train->add_option("--config", ta.config_file, "key=value config file");
  train->add_option("--set", ta.overrides, "Override as key=value (repeatable)");
  train->add_option("--max-steps", ta.max_steps);
  train->add_option("--batch-size", ta.batch_size);
  train->add_option("--crop-size", ta.crop_size);
  train->add_option("--eval-period", ta.eval_period);
  train->add_option("--lambda", ta.lambda);
  train->add_option("--lr", ta.lr);
  train->add_option("--seed", ta.seed);
  train->add_option("--train-dir", ta.train_dir, "Directory of training PNGs")->required();
  train->add_option("--eval-dir", ta.eval_dir, "Held-out PNGs (default: training images)");
  train->add_option("--crops", ta.crops, "Size of the fixed crop dataset");
  train->add_option("--eval-crops", ta.eval_crops, "Held-out crops per evaluation");
  train->add_option("-o,--output", ta.output, "Checkpoint path");
  train->add_option("--log", ta.log_path, "NDJSON training log (default stdout)");
  train->add_option("--resume", ta.resume, "Continue from a checkpoint");

  std::string model_path, input, output, recon;
  auto* encode = app.add_subcommand("encode", "Compress a PNG into a bitstream");
  encode->add_option("input", input, "Input PNG")->required();
  encode->add_option("-m,--model", model_path, "Checkpoint");
  encode->add_option("-o,--output", output, "Output bitstream")->required();
  encode->add_option("--recon", recon, "Also write the encoder-side reconstruction");

  auto* decode = app.add_subcommand("decode", "Decompress a bitstream to PNG");
  decode->add_option("input", input, "Input bitstream")->required();
  decode->add_option("-m,--model", model_path, "Checkpoint");
  decode->add_option("-o,--output", output, "Output PNG")->required();

  std::string csv_path, curve_path;
  auto* eval = app.add_subcommand("eval", "Encode and decode every PNG in a directory");
  eval->add_option("input", input, "Image directory")->required();
  eval->add_option("-m,--model", model_path, "Checkpoint");
  eval->add_option("--csv", csv_path, "Per-image table");
  eval->add_option("--curve", curve_path, "RD curve file (.csv/.json); the point is appended");

  std::string anchor_path, test_path, plot_path;
  bool pchip = false;
  auto* bd = app.add_subcommand("bdrate", "BD-rate of a test curve against an anchor");
  bd->add_option("anchor", anchor_path)->required();
  bd->add_option("test", test_path)->required();
  bd->add_flag("--pchip", pchip, "Monotone piecewise-cubic interpolation");
  bd->add_option("--plot", plot_path, "Write both curves to a PNG plot");

  std::string tap_name = "channel", point;
  double threshold = 0.3;
  auto* erf = app.add_subcommand("erf", "Effective receptive field map");
  erf->add_option("input", input, "Input PNG")->required();
  erf->add_option("-m,--model", model_path, "Checkpoint");
  erf->add_option("--tap", tap_name, "stem, rb, space, channel or latent");
  erf->add_option("--point", point, "Probe as y,x in tap coordinates (default centre)");
  erf->add_option("--threshold", threshold);
  erf->add_option("-o,--output", output, "Grayscale PNG of the clipped map");

  int block = -1;
  auto* attn = app.add_subcommand("attn-dump", "Export stage II attention maps of one SCH block");
  attn->add_option("input", input, "Input PNG")->required();
  attn->add_option("-m,--model", model_path, "Checkpoint");
  attn->add_option("--block", block, "Flat block index in g_a (default: last)");
  attn->add_option("-o,--output", output, "Output directory")->required();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    if (!rev.empty()) rev.pop_back();  // program name
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    ReportError(err, "usage", kExitUsage, e.what());
    return kExitUsage;
  }

  try {
    if (*train) return RunTrain(ta, out, err);

    if (*encode) {
      CompressionModel<float> model = LoadModel(model_path, err);
      const uint32_t hash = model.Fingerprint();
      const Image image = ReadPng(input);
      EncodeResult r = EncodeImage(image, model, BuildCodecTables(model), hash);
      const std::vector<uint8_t> bytes = r.stream.Serialize();
      WriteBytes(output, bytes);
      if (!recon.empty()) WritePng(recon, r.reconstruction);
      nlohmann::json j;
      j["bytes"] = bytes.size();
      j["bpp"] = BitsPerPixel(bytes.size(), image.height, image.width);
      j["estimated_bpp"] = r.estimated_bits / (double(image.height) * image.width);
      j["psnr"] = Psnr(image, r.reconstruction);
      out << j.dump() << "\n";
      return kExitOk;
    }

    if (*decode) {
      const Bitstream stream = Bitstream::Parse(ReadBytes(input));
      CompressionModel<float> model = LoadModel(model_path, err);
      const Image image = DecodeImage(stream, model, BuildCodecTables(model),
                                      model.Fingerprint());
      WritePng(output, image);
      out << "{\"width\":" << image.width << ",\"height\":" << image.height << "}\n";
      return kExitOk;
    }

    if (*eval) {
      CompressionModel<float> model = LoadModel(model_path, err);
      const EvalTable table = EvaluateDirectory(input, model);
      if (!csv_path.empty()) WriteEvalCsv(csv_path, table);
      if (!curve_path.empty()) {
        RdCurve curve;
        if (fs::exists(curve_path)) curve = ReadRdCurve(curve_path);
        curve.push_back({table.mean_bpp, table.mean_psnr});
        std::sort(curve.begin(), curve.end(),
                  [](const RdPoint& a, const RdPoint& b) { return a.bpp < b.bpp; });
        WriteRdCurve(curve_path, curve);
      }
      for (const auto& r : table.rows) {
        out << r.name << ": bpp=" << r.bpp << " estimated=" << r.estimated_bpp
            << " psnr=" << r.psnr << (r.decoder_matches ? "" : " DECODER-MISMATCH")
            << "\n";
      }
      out << "mean: bpp=" << table.mean_bpp << " psnr=" << table.mean_psnr
          << " estimate_gap=" << table.estimate_gap << "\n";
      return kExitOk;
    }

    if (*bd) {
      const RdCurve anchor = ReadRdCurve(anchor_path), test = ReadRdCurve(test_path);
      const double v = BdRate(anchor, test,
                              pchip ? BdInterpolation::kPchip : BdInterpolation::kCubic);
      if (!plot_path.empty()) PlotRdCurves(plot_path, {anchor, test});
      out << "BD-rate: " << std::fixed << std::setprecision(2) << (v == 0 ? 0.0 : v)
          << "%\n";
      return kExitOk;
    }

    if (*erf) {
      CompressionModel<float> model = LoadModel(model_path, err);
      int64_t py = -1, px = -1;
      if (!point.empty()) {
        char comma = 0;
        std::istringstream ps(point);
        if (!(ps >> py >> comma >> px) || comma != ',') {
          throw ConfigError("--point expects y,x");
        }
      }
      const Image image = ReadPng(input);
      const ErfMap map = ComputeErf(model, PaddedInput(image, model.config),
                                    ParseErfTap(tap_name), py, px, threshold);
      if (!output.empty()) WriteGrayPng(output, map.width, map.height, map.Clipped());
      nlohmann::json j;
      j["tap"] = ErfTapName(ParseErfTap(tap_name));
      j["area"] = map.Area();
      j["threshold"] = map.threshold;
      j["probe"] = {map.probe_y, map.probe_x};
      out << j.dump() << "\n";
      return kExitOk;
    }

    if (*attn) {
      CompressionModel<float> model = LoadModel(model_path, err);
      if (block < 0) block = model.g_a.num_blocks() - 1;
      const Image image = ReadPng(input);
      const AttentionDump dump =
          DumpChannelAttention(model, PaddedInput(image, model.config), block);
      fs::create_directories(output);
      nlohmann::json index;
      index["windows"] = dump.windows;
      index["heads"] = dump.heads;
      index["size"] = dump.size;
      index["maps"] = nlohmann::json::array();
      for (size_t i = 0; i < dump.maps.size(); ++i) {
        const int64_t w = i / dump.heads, h = i % dump.heads;
        std::vector<double> vis = dump.maps[i];
        const double peak = *std::max_element(vis.begin(), vis.end());
        if (peak > 0) {
          for (auto& v : vis) v /= peak;
        }
        std::ostringstream name;
        name << "w" << std::setw(4) << std::setfill('0') << w << "_h" << h << ".png";
        WriteGrayPng((fs::path(output) / name.str()).string(), dump.size, dump.size, vis);
        index["maps"].push_back({{"window", w}, {"head", h}, {"file", name.str()},
                                 {"values", dump.maps[i]}});
      }
      std::ofstream(fs::path(output) / "maps.json") << index.dump() << "\n";
      out << "{\"maps\":" << dump.maps.size() << ",\"windows\":" << dump.windows
          << ",\"heads\":" << dump.heads << "}\n";
      return kExitOk;
    }
  } catch (const std::exception& e) {
    std::string kind;
    const int code = CodeFor(e, &kind);
    ReportError(err, kind, code, e.what());
    return code;
  }
  return kExitUsage;
}

}  // namespace sch
