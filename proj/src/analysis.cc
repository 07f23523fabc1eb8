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

#include "sch/analysis.h"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "sch/errors.h"
#include "sch/training.h"

namespace sch {
namespace {

struct Samples {
  std::vector<double> psnr;
  std::vector<double> log_rate;
};

Samples ToSamples(const RdCurve& c) {
  if (c.size() < 4) {
    throw MetricError("BD-rate needs at least 4 points per curve, got " +
                      std::to_string(c.size()));
  }
  Samples s;
  for (const auto& p : c) {
    if (!(p.bpp > 0) || !std::isfinite(p.psnr)) {
      throw MetricError("RD points need positive rate and finite PSNR");
    }
    s.psnr.push_back(p.psnr);
    s.log_rate.push_back(std::log10(p.bpp));
  }
  return s;
}

// Integral over [lo, hi] of the least-squares cubic through the samples.
double CubicIntegral(const Samples& s, double lo, double hi) {
  const int n = static_cast<int>(s.psnr.size());
  Eigen::MatrixXd a(n, 4);
  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i) {
    double v = 1;
    for (int k = 0; k < 4; ++k, v *= s.psnr[i]) a(i, k) = v;
    b(i) = s.log_rate[i];
  }
  const Eigen::VectorXd c = a.colPivHouseholderQr().solve(b);
  auto antiderivative = [&](double x) {
    double acc = 0, v = x;
    for (int k = 0; k < 4; ++k, v *= x) acc += c(k) * v / (k + 1);
    return acc;
  };
  return antiderivative(hi) - antiderivative(lo);
}

// Monotone piecewise cubic Hermite interpolant (Fritsch-Carlson slopes with
// the three-point end rule).
class Pchip {
 public:
  explicit Pchip(const Samples& s) {
    std::vector<size_t> order(s.psnr.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return s.psnr[a] < s.psnr[b]; });
    for (size_t i : order) {
      x_.push_back(s.psnr[i]);
      y_.push_back(s.log_rate[i]);
    }
    const size_t n = x_.size();
    std::vector<double> h(n - 1), delta(n - 1);
    for (size_t k = 0; k + 1 < n; ++k) {
      h[k] = x_[k + 1] - x_[k];
      if (h[k] <= 0) throw MetricError("PSNR values must be distinct");
      delta[k] = (y_[k + 1] - y_[k]) / h[k];
    }
    d_.assign(n, 0.0);
    for (size_t k = 1; k + 1 < n; ++k) {
      if (delta[k - 1] * delta[k] <= 0) continue;
      const double w1 = 2 * h[k] + h[k - 1], w2 = h[k] + 2 * h[k - 1];
      d_[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
    }
    d_[0] = EndSlope(h[0], h[1], delta[0], delta[1]);
    d_[n - 1] = EndSlope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
  }

  double operator()(double x) const {
    size_t k = std::upper_bound(x_.begin(), x_.end(), x) - x_.begin();
    k = std::clamp<size_t>(k, 1, x_.size() - 1) - 1;
    const double h = x_[k + 1] - x_[k], t = (x - x_[k]) / h;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * y_[k] + (t3 - 2 * t2 + t) * h * d_[k] +
           (-2 * t3 + 3 * t2) * y_[k + 1] + (t3 - t2) * h * d_[k + 1];
  }

  // Simpson's rule is exact on each cubic piece.
  double Integral(double lo, double hi) const {
    std::vector<double> cuts = {lo};
    for (double k : x_) {
      if (k > lo && k < hi) cuts.push_back(k);
    }
    cuts.push_back(hi);
    double acc = 0;
    for (size_t i = 0; i + 1 < cuts.size(); ++i) {
      const double a = cuts[i], b = cuts[i + 1];
      acc += (b - a) / 6 * ((*this)(a) + 4 * (*this)((a + b) / 2) + (*this)(b));
    }
    return acc;
  }

 private:
  static double EndSlope(double h0, double h1, double d0, double d1) {
    double d = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (d * d0 <= 0) return 0;
    if (d0 * d1 <= 0 && std::abs(d) > 3 * std::abs(d0)) return 3 * d0;
    return d;
  }

  std::vector<double> x_, y_, d_;
};

std::string Lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), ::tolower);
  return s;
}

void FreezeParams(CompressionModel<float>& model, bool frozen) {
  model.Visit([&](const std::string&, Var<float>& v) {
    v.node()->requires_grad = !frozen;
  });
}

void DrawLine(Image& im, int x0, int y0, int x1, int y1, const uint8_t rgb[3]) {
  const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    if (x0 >= 0 && x0 < im.width && y0 >= 0 && y0 < im.height) {
      for (int c = 0; c < 3; ++c) im.at(y0, x0, c) = rgb[c];
    }
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) { err += dy; x0 += sx; }
    if (e2 <= dx) { err += dx; y0 += sy; }
  }
}

}  // namespace

double PsnrFromMse(double mse) {
  if (mse <= 0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / mse));
}

double Psnr(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height || a.rgb.size() != b.rgb.size()) {
    throw DimensionError("PSNR needs images of equal size");
  }
  if (a.rgb.empty()) throw DimensionError("PSNR of empty images");
  double acc = 0;
  for (size_t i = 0; i < a.rgb.size(); ++i) {
    const double d = double(a.rgb[i]) - double(b.rgb[i]);
    acc += d * d;
  }
  return PsnrFromMse(acc / a.rgb.size());
}

double BdRate(const RdCurve& anchor, const RdCurve& test,
              BdInterpolation method) {
  const Samples sa = ToSamples(anchor), st = ToSamples(test);
  const double lo = std::max(*std::min_element(sa.psnr.begin(), sa.psnr.end()),
                             *std::min_element(st.psnr.begin(), st.psnr.end()));
  const double hi = std::min(*std::max_element(sa.psnr.begin(), sa.psnr.end()),
                             *std::max_element(st.psnr.begin(), st.psnr.end()));
  if (!(hi > lo)) throw MetricError("RD curves have no PSNR overlap");
  double ia, it;
  if (method == BdInterpolation::kCubic) {
    ia = CubicIntegral(sa, lo, hi);
    it = CubicIntegral(st, lo, hi);
  } else {
    ia = Pchip(sa).Integral(lo, hi);
    it = Pchip(st).Integral(lo, hi);
  }
  const double avg = (it - ia) / (hi - lo);
  return 100.0 * (std::pow(10.0, avg) - 1.0);
}

RdCurve ReadRdCurve(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  RdCurve curve;
  if (Lower(std::filesystem::path(path).extension().string()) == ".json") {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::exception& e) {
      throw InputError(path + ": " + e.what());
    }
    const nlohmann::json& pts = j.is_array() ? j : j.at("points");
    for (const auto& p : pts) {
      curve.push_back({p.at("bpp").get<double>(), p.at("psnr").get<double>()});
    }
    return curve;
  }
  std::string line;
  int lineno = 0;
  while (std::getline(buf, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    RdPoint p;
    if (!(ls >> p.bpp >> p.psnr)) {
      if (lineno == 1) continue;  // header
      throw InputError(path + ":" + std::to_string(lineno) + ": malformed row");
    }
    curve.push_back(p);
  }
  return curve;
}

void WriteRdCurve(const std::string& path, const RdCurve& curve) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out.precision(10);
  if (Lower(std::filesystem::path(path).extension().string()) == ".json") {
    nlohmann::json j;
    j["points"] = nlohmann::json::array();
    for (const auto& p : curve) j["points"].push_back({{"bpp", p.bpp}, {"psnr", p.psnr}});
    out << j.dump(2) << "\n";
    return;
  }
  out << "bpp,psnr\n";
  for (const auto& p : curve) out << p.bpp << "," << p.psnr << "\n";
}

ErfTap ParseErfTap(const std::string& name) {
  const std::string n = Lower(name);
  if (n == "stem") return ErfTap::kStemConv;
  if (n == "rb" || n == "residual") return ErfTap::kResidualBlock;
  if (n == "space") return ErfTap::kSpaceAttention;
  if (n == "channel") return ErfTap::kChannelAttention;
  if (n == "latent") return ErfTap::kLatent;
  throw ConfigError("unknown ERF tap '" + name +
                    "' (stem, rb, space, channel, latent)");
}

std::string ErfTapName(ErfTap tap) {
  switch (tap) {
    case ErfTap::kStemConv: return "stem";
    case ErfTap::kResidualBlock: return "rb";
    case ErfTap::kSpaceAttention: return "space";
    case ErfTap::kChannelAttention: return "channel";
    case ErfTap::kLatent: return "latent";
  }
  return "?";
}

int64_t ErfMap::Area() const {
  return std::count_if(values.begin(), values.end(),
                       [&](double v) { return v > threshold; });
}

std::vector<double> ErfMap::Clipped() const {
  std::vector<double> out(values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    out[i] = std::min(values[i], threshold) / threshold;
  }
  return out;
}

ErfMap ComputeErf(CompressionModel<float>& model, const Tensor<float>& x,
                  ErfTap tap, int64_t probe_y, int64_t probe_x,
                  double threshold) {
  if (x.rank() != 4 || x.dim(0) != 1) {
    throw DimensionError("ERF probing needs a single image [1, 3, H, W]");
  }
  struct Thaw {
    CompressionModel<float>* m;
    ~Thaw() { FreezeParams(*m, false); }
  } thaw{&model};
  FreezeParams(model, true);

  Var<float> input(x, true);
  AnalysisProbe<float> probe;
  Var<float> latent = model.g_a.Forward(input, &probe);
  Var<float> t;
  switch (tap) {
    case ErfTap::kStemConv: t = probe.stem_conv; break;
    case ErfTap::kResidualBlock: t = probe.last_channel.residual; break;
    case ErfTap::kSpaceAttention: t = probe.last_space.attention; break;
    case ErfTap::kChannelAttention: t = probe.last_channel.attention; break;
    case ErfTap::kLatent: t = latent; break;
  }
  if (t.numel() == 0) throw ConfigError("model has no block for this tap");
  const int64_t c = t.dim(1), h = t.dim(2), w = t.dim(3);
  if (probe_y < 0) probe_y = h / 2;
  if (probe_x < 0) probe_x = w / 2;
  if (probe_y >= h || probe_x >= w) {
    throw DimensionError("probe point outside the tapped feature map");
  }
  Tensor<float> seed(t.shape(), 0.0f);
  for (int64_t k = 0; k < c; ++k) seed[(k * h + probe_y) * w + probe_x] = 1.0f;
  t.Backward(seed);

  ErfMap map;
  map.height = static_cast<int>(x.dim(2));
  map.width = static_cast<int>(x.dim(3));
  map.threshold = threshold;
  map.probe_y = probe_y;
  map.probe_x = probe_x;
  map.values.assign(size_t(map.width) * map.height, 0.0);
  const Tensor<float>& g = input.grad();
  const size_t plane = map.values.size();
  for (int k = 0; k < 3; ++k) {
    for (size_t i = 0; i < plane; ++i) map.values[i] += std::abs(g[k * plane + i]);
  }
  const double peak = *std::max_element(map.values.begin(), map.values.end());
  if (peak > 0) {
    for (auto& v : map.values) v /= peak;
  }
  return map;
}

AttentionDump DumpChannelAttention(const CompressionModel<float>& model,
                                   const Tensor<float>& x, int block) {
  if (block < 0 || block >= model.g_a.num_blocks()) {
    throw DimensionError("block index " + std::to_string(block) +
                         " out of range [0, " +
                         std::to_string(model.g_a.num_blocks()) + ")");
  }
  if (x.rank() != 4 || x.dim(0) != 1) {
    throw DimensionError("attention dump needs a single image [1, 3, H, W]");
  }
  NoGradGuard no_grad;
  AnalysisProbe<float> probe;
  probe.trace_block = block;
  model.g_a.Forward(Var<float>(x), &probe);
  const Tensor<float>& maps = probe.trace.maps.at(0);
  AttentionDump dump;
  dump.heads = probe.trace.heads;
  dump.size = maps.dim(1);
  dump.windows = maps.dim(0) / dump.heads;
  const int64_t each = dump.size * dump.size;
  for (int64_t m = 0; m < maps.dim(0); ++m) {
    dump.maps.emplace_back(maps.data() + m * each, maps.data() + (m + 1) * each);
  }
  return dump;
}

EvalRow EvaluateImage(const std::string& name, const Image& image,
                      const CompressionModel<float>& model,
                      const CodecTables& tables, uint32_t hash) {
  EncodeResult enc = EncodeImage(image, model, tables, hash);
  const std::vector<uint8_t> bytes = enc.stream.Serialize();
  const Image decoded =
      DecodeImage(Bitstream::Parse(bytes), model, tables, hash);
  EvalRow row;
  row.name = name;
  row.width = image.width;
  row.height = image.height;
  row.bytes = bytes.size();
  row.bpp = BitsPerPixel(bytes.size(), image.height, image.width);
  row.estimated_bpp = enc.estimated_bits / (double(image.height) * image.width);
  row.psnr = Psnr(image, decoded);
  row.decoder_matches = decoded == enc.reconstruction;
  return row;
}

EvalTable EvaluateDirectory(const std::string& directory,
                            CompressionModel<float>& model) {
  const uint32_t hash = model.Fingerprint();
  const CodecTables tables = BuildCodecTables(model);
  EvalTable table;
  double bits = 0, est = 0;
  for (const auto& path : ListPngs(directory)) {
    table.rows.push_back(EvaluateImage(
        std::filesystem::path(path).filename().string(), ReadPng(path), model,
        tables, hash));
    const EvalRow& r = table.rows.back();
    table.mean_bpp += r.bpp;
    table.mean_estimated_bpp += r.estimated_bpp;
    table.mean_psnr += r.psnr;
    bits += r.bpp * r.width * r.height;
    est += r.estimated_bpp * r.width * r.height;
  }
  if (table.rows.empty()) throw InputError("no PNG images in " + directory);
  const double n = static_cast<double>(table.rows.size());
  table.mean_bpp /= n;
  table.mean_estimated_bpp /= n;
  table.mean_psnr /= n;
  table.estimate_gap = est > 0 ? std::abs(bits - est) / est : 0;
  return table;
}

void WriteEvalCsv(const std::string& path, const EvalTable& table) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out.precision(8);
  out << "image,width,height,bytes,bpp,estimated_bpp,psnr,decoder_matches\n";
  for (const auto& r : table.rows) {
    out << r.name << "," << r.width << "," << r.height << "," << r.bytes << ","
        << r.bpp << "," << r.estimated_bpp << "," << r.psnr << ","
        << (r.decoder_matches ? 1 : 0) << "\n";
  }
}

void PlotRdCurves(const std::string& path, const std::vector<RdCurve>& curves,
                  int width, int height) {
  static const uint8_t kColors[][3] = {{214, 39, 40},  {31, 119, 180},
                                       {44, 160, 44},  {255, 127, 14},
                                       {148, 103, 189}, {140, 86, 75}};
  static const uint8_t kBlack[3] = {0, 0, 0};
  static const uint8_t kGrid[3] = {220, 220, 220};
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& c : curves) {
    for (const auto& p : c) {
      x0 = std::min(x0, p.bpp); x1 = std::max(x1, p.bpp);
      y0 = std::min(y0, p.psnr); y1 = std::max(y1, p.psnr);
    }
  }
  if (x0 > x1) throw MetricError("nothing to plot");
  const double px = std::max(1e-6, 0.05 * (x1 - x0)), py = std::max(1e-6, 0.05 * (y1 - y0));
  x0 -= px; x1 += px; y0 -= py; y1 += py;
  Image im(width, height);
  std::fill(im.rgb.begin(), im.rgb.end(), 255);
  const int m = 40;
  auto sx = [&](double v) { return m + int(std::lround((v - x0) / (x1 - x0) * (width - 2 * m))); };
  auto sy = [&](double v) { return height - m - int(std::lround((v - y0) / (y1 - y0) * (height - 2 * m))); };
  for (int i = 1; i < 10; ++i) {
    const int gx = m + i * (width - 2 * m) / 10, gy = m + i * (height - 2 * m) / 10;
    DrawLine(im, gx, m, gx, height - m, kGrid);
    DrawLine(im, m, gy, width - m, gy, kGrid);
  }
  DrawLine(im, m, height - m, width - m, height - m, kBlack);
  DrawLine(im, m, m, m, height - m, kBlack);
  for (size_t ci = 0; ci < curves.size(); ++ci) {
    const uint8_t* col = kColors[ci % 6];
    RdCurve c = curves[ci];
    std::sort(c.begin(), c.end(), [](auto& a, auto& b) { return a.bpp < b.bpp; });
    for (size_t i = 0; i < c.size(); ++i) {
      const int X = sx(c[i].bpp), Y = sy(c[i].psnr);
      for (int d = -3; d <= 3; ++d) {
        DrawLine(im, X - 3, Y + d, X + 3, Y + d, col);
      }
      if (i > 0) DrawLine(im, sx(c[i - 1].bpp), sy(c[i - 1].psnr), X, Y, col);
    }
  }
  WritePng(path, im);
}

}  // namespace sch
