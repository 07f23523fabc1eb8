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

#ifndef SCH_ANALYSIS_H_
#define SCH_ANALYSIS_H_

#include <cstdint>
#include <string>
#include <vector>

#include "sch/codec.h"
#include "sch/image_io.h"
#include "sch/model.h"

namespace sch {

inline constexpr double kPsnrCap = 100.0;

// 10 log10(255^2 / MSE) on the 8-bit scale; identical inputs give kPsnrCap.
double Psnr(const Image& a, const Image& b);
double PsnrFromMse(double mse_8bit);

struct RdPoint {
  double bpp = 0;
  double psnr = 0;
};
using RdCurve = std::vector<RdPoint>;

enum class BdInterpolation {
  kCubic,  // least-squares cubic of log10(rate) against PSNR (default)
  kPchip,  // monotone piecewise cubic through the points
};

// Average rate difference of `test` against `anchor` at equal PSNR, percent.
// Raises MetricError for fewer than 4 points or no PSNR overlap.
double BdRate(const RdCurve& anchor, const RdCurve& test,
              BdInterpolation method = BdInterpolation::kCubic);

RdCurve ReadRdCurve(const std::string& path);   // .csv or .json
void WriteRdCurve(const std::string& path, const RdCurve& curve);

// Which activation of g_a the receptive field is measured at.
enum class ErfTap {
  kStemConv,          // first convolution after the wavelet transform
  kResidualBlock,     // conv branch of the last block's stage II
  kSpaceAttention,    // attention branch of the last block's stage I
  kChannelAttention,  // attention branch of the last block's stage II
  kLatent,            // g_a output
};
ErfTap ParseErfTap(const std::string& name);
std::string ErfTapName(ErfTap tap);

struct ErfMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // |d feature / d x| normalised to max 1
  double threshold = 0.3;
  int64_t probe_y = 0;  // in tap coordinates
  int64_t probe_x = 0;

  // Pixels above the threshold.
  int64_t Area() const;
  // Visualisation: values clipped at the threshold and rescaled to [0, 1].
  std::vector<double> Clipped() const;
};

// Gradient of one tap location (all channels summed) with respect to the
// input image [1, 3, H, W]. probe < 0 selects the centre of the tap's feature
// map. Parameter gradients are suspended while probing.
ErfMap ComputeErf(CompressionModel<float>& model, const Tensor<float>& x,
                  ErfTap tap, int64_t probe_y = -1, int64_t probe_x = -1,
                  double threshold = 0.3);

struct AttentionDump {
  int64_t windows = 0;
  int64_t heads = 0;
  int64_t size = 0;  // maps are size x size
  std::vector<std::vector<double>> maps;  // window-major, then head
};

// Stage II attention maps of SCH block `block` (flat index through g_a).
AttentionDump DumpChannelAttention(const CompressionModel<float>& model,
                                   const Tensor<float>& x, int block);

struct EvalRow {
  std::string name;
  int width = 0, height = 0;
  size_t bytes = 0;
  double bpp = 0;
  double estimated_bpp = 0;
  double psnr = 0;
  bool decoder_matches = false;  // decode(encode(x)) == encoder reconstruction
};

struct EvalTable {
  std::vector<EvalRow> rows;
  double mean_bpp = 0;
  double mean_estimated_bpp = 0;
  double mean_psnr = 0;
  // |actual - estimated| / estimated over the summed rates.
  double estimate_gap = 0;
};

EvalRow EvaluateImage(const std::string& name, const Image& image,
                      const CompressionModel<float>& model,
                      const CodecTables& tables, uint32_t hash);
// Every PNG in `directory` through the real bitstream.
EvalTable EvaluateDirectory(const std::string& directory,
                            CompressionModel<float>& model);
void WriteEvalCsv(const std::string& path, const EvalTable& table);

// Line plot of RD curves (PSNR against bpp) as an RGB PNG.
void PlotRdCurves(const std::string& path, const std::vector<RdCurve>& curves,
                  int width = 640, int height = 480);

}  // namespace sch

#endif  // SCH_ANALYSIS_H_
