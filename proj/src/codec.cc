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

#include "sch/codec.h"

#include <algorithm>
#include <cmath>

#include "sch/errors.h"

namespace sch {
namespace {

constexpr uint32_t kTop = 1u << 24;

double Logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

void PutU16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(v >> 8);
  out.push_back(v & 0xFF);
}

void PutU32(std::vector<uint8_t>& out, uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back((v >> s) & 0xFF);
}

class Reader {
 public:
  explicit Reader(std::span<const uint8_t> data) : data_(data) {}
  size_t remaining() const { return data_.size() - pos_; }
  void Need(size_t n, const std::string& what) const {
    if (remaining() < n) throw DecodeError("truncated bitstream: " + what);
  }
  uint8_t U8(const std::string& what) {
    Need(1, what);
    return data_[pos_++];
  }
  uint16_t U16(const std::string& what) {
    Need(2, what);
    uint16_t v = uint16_t(data_[pos_] << 8) | data_[pos_ + 1];
    pos_ += 2;
    return v;
  }
  uint32_t U32(const std::string& what) {
    Need(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | data_[pos_ + i];
    pos_ += 4;
    return v;
  }
  std::vector<uint8_t> Bytes(size_t n, const std::string& what) {
    Need(n, what);
    std::vector<uint8_t> v(data_.begin() + pos_, data_.begin() + pos_ + n);
    pos_ += n;
    return v;
  }

 private:
  std::span<const uint8_t> data_;
  size_t pos_ = 0;
};

int64_t Mirror(int64_t i, int64_t n) {
  if (n == 1) return 0;
  const int64_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

Tensor<float> CropImage(const Tensor<float>& x, int64_t h, int64_t w) {
  const int64_t c = x.dim(1), ph = x.dim(2), pw = x.dim(3);
  Tensor<float> out({1, c, h, w});
  for (int64_t k = 0; k < c; ++k) {
    for (int64_t y = 0; y < h; ++y) {
      std::copy_n(x.data() + (k * ph + y) * pw, w,
                  out.data() + (k * h + y) * w);
    }
  }
  return out;
}

std::vector<int32_t> ToSymbols(const Tensor<float>& q) {
  std::vector<int32_t> s(q.numel());
  for (int64_t i = 0; i < q.numel(); ++i) s[i] = static_cast<int32_t>(q[i]);
  return s;
}

Tensor<float> FromSymbols(const std::vector<int32_t>& s, Shape shape) {
  Tensor<float> t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(s[i]);
  return t;
}

std::vector<int> ScaleIds(const Tensor<float>& sigma) {
  std::vector<int> ids(sigma.numel());
  for (int64_t i = 0; i < sigma.numel(); ++i) ids[i] = ScaleIndex(sigma[i]);
  return ids;
}

// Table id per element of a [1, C, h, w] tensor: its channel.
std::vector<int> ChannelIds(const Shape& shape) {
  const int64_t plane = shape[2] * shape[3];
  std::vector<int> ids(NumElements(shape));
  for (size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i / plane);
  return ids;
}

std::vector<int32_t> DecodeSegment(std::span<const uint8_t> bytes,
                                   const std::vector<int>& ids,
                                   const std::vector<CdfTable>& tables,
                                   const std::string& name) {
  try {
    return RangeDecode(bytes, ids, tables);
  } catch (const DecodeError& e) {
    throw DecodeError(name + ": " + e.what());
  }
}

}  // namespace

double QuantizeRound(double v) { return std::round(v); }

template <typename T>
Tensor<T> Quantize(const Tensor<T>& v, QuantizeMode mode, Rng* rng) {
  Tensor<T> out(v.shape());
  if (mode == QuantizeMode::kRound) {
    for (int64_t i = 0; i < v.numel(); ++i) {
      out[i] = static_cast<T>(QuantizeRound(v[i]));
    }
    return out;
  }
  if (rng == nullptr) throw ConfigError("noise quantisation needs a generator");
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int64_t i = 0; i < v.numel(); ++i) {
    out[i] = static_cast<T>(v[i] + u(*rng));
  }
  return out;
}

template Tensor<float> Quantize(const Tensor<float>&, QuantizeMode, Rng*);
template Tensor<double> Quantize(const Tensor<double>&, QuantizeMode, Rng*);

const std::vector<double>& ScaleTable() {
  static const std::vector<double> table = [] {
    std::vector<double> t(kScaleCount);
    const double lo = std::log(kScaleMin), hi = std::log(kScaleMax);
    for (int i = 0; i < kScaleCount; ++i) {
      t[i] = std::exp(lo + (hi - lo) * i / (kScaleCount - 1));
    }
    t.front() = kScaleMin;
    t.back() = kScaleMax;
    return t;
  }();
  return table;
}

int ScaleIndex(double sigma) {
  const auto& t = ScaleTable();
  auto it = std::lower_bound(t.begin(), t.end(), sigma);
  if (it == t.end()) return kScaleCount - 1;
  return static_cast<int>(it - t.begin());
}

CdfTable QuantizeProbabilities(const std::vector<double>& probs, int bound) {
  const int bins = 2 * bound + 2;
  if (bound < 0 || static_cast<int>(probs.size()) != bins) {
    throw DimensionError("probability vector does not match the symbol bound");
  }
  double total = 0;
  for (double p : probs) {
    if (!(p >= 0) || !std::isfinite(p)) {
      throw ConfigError("invalid bin probability");
    }
    total += p;
  }
  if (total <= 0) throw ConfigError("bin probabilities sum to zero");
  const double budget = double(kTotalFrequency) - bins;
  std::vector<int64_t> freq(bins);
  int64_t used = 0;
  for (int i = 0; i < bins; ++i) {
    freq[i] = 1 + static_cast<int64_t>(std::floor(probs[i] / total * budget));
    used += freq[i];
  }
  int64_t rest = int64_t(kTotalFrequency) - used;
  freq[bound] += rest;
  while (freq[bound] < 1) {  // only reachable through rounding excess
    auto big = std::max_element(freq.begin(), freq.end());
    --*big;
    ++freq[bound];
  }
  CdfTable table;
  table.bound = bound;
  table.cdf.assign(bins + 1, 0);
  for (int i = 0; i < bins; ++i) {
    table.cdf[i + 1] = table.cdf[i] + static_cast<uint32_t>(freq[i]);
  }
  return table;
}

CdfTable BuildGaussianTable(double scale, int bound) {
  std::vector<double> p(2 * bound + 2);
  for (int k = -bound; k <= bound; ++k) {
    const double a = std::abs(k);
    // Lower-tail form keeps precision far from the mode and makes the table
    // exactly symmetric.
    p[k + bound] = NormalCdf((0.5 - a) / scale) - NormalCdf((-0.5 - a) / scale);
  }
  p.back() = 2.0 * NormalCdf(-(bound + 0.5) / scale);
  return QuantizeProbabilities(p, bound);
}

std::vector<CdfTable> BuildCdfTables(const std::vector<double>& scales,
                                     int bound) {
  std::vector<CdfTable> tables;
  tables.reserve(scales.size());
  for (double s : scales) tables.push_back(BuildGaussianTable(s, bound));
  return tables;
}

void RangeEncoder::Code(uint32_t start, uint32_t size) {
  range_ >>= kPrecisionBits;
  low_ += uint64_t(start) * range_;
  range_ *= size;
  while (range_ < kTop) {
    range_ <<= 8;
    ShiftLow();
  }
}

void RangeEncoder::ShiftLow() {
  if (uint32_t(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    const uint8_t carry = static_cast<uint8_t>(low_ >> 32);
    uint8_t temp = cache_;
    do {
      // The first byte is always zero; it is implied rather than stored.
      if (first_) {
        first_ = false;
      } else {
        out_.push_back(static_cast<uint8_t>(temp + carry));
      }
      temp = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = static_cast<uint8_t>((low_ >> 24) & 0xFF);
  }
  ++cache_size_;
  low_ = (low_ & 0x00FFFFFFu) << 8;
}

void RangeEncoder::EncodeBin(int bin, const CdfTable& table) {
  if (bin < 0 || bin >= table.num_bins()) {
    throw DimensionError("bin index out of range");
  }
  Code(table.cdf[bin], table.frequency(bin));
}

void RangeEncoder::EncodeRaw16(uint32_t value) { Code(value & 0xFFFF, 1); }

void RangeEncoder::Encode(int32_t symbol, const CdfTable& table) {
  if (symbol >= -table.bound && symbol <= table.bound) {
    EncodeBin(symbol + table.bound, table);
    return;
  }
  EncodeBin(table.escape_bin(), table);
  const uint32_t zigzag =
      (static_cast<uint32_t>(symbol) << 1) ^ static_cast<uint32_t>(symbol >> 31);
  EncodeRaw16(zigzag >> 16);
  EncodeRaw16(zigzag);
}

std::vector<uint8_t> RangeEncoder::Finish() {
  for (int i = 0; i < 5; ++i) ShiftLow();
  return std::move(out_);
}

RangeDecoder::RangeDecoder(std::span<const uint8_t> data) : data_(data) {
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | Next();
}

uint8_t RangeDecoder::Next() {
  if (pos_ >= data_.size()) throw DecodeError("range-coded segment truncated");
  return data_[pos_++];
}

uint32_t RangeDecoder::Target() {
  range_ >>= kPrecisionBits;
  const uint32_t v = code_ / range_;
  if (v >= kTotalFrequency) throw DecodeError("range-coded segment corrupt");
  return v;
}

void RangeDecoder::Consume(uint32_t start, uint32_t size) {
  code_ -= start * range_;
  range_ *= size;
  while (range_ < kTop) {
    code_ = (code_ << 8) | Next();
    range_ <<= 8;
  }
}

int RangeDecoder::DecodeBin(const CdfTable& table) {
  const uint32_t v = Target();
  auto it = std::upper_bound(table.cdf.begin(), table.cdf.end(), v);
  const int bin = static_cast<int>(it - table.cdf.begin()) - 1;
  Consume(table.cdf[bin], table.frequency(bin));
  return bin;
}

uint32_t RangeDecoder::DecodeRaw16() {
  const uint32_t v = Target();
  Consume(v, 1);
  return v;
}

int32_t RangeDecoder::Decode(const CdfTable& table) {
  const int bin = DecodeBin(table);
  if (bin != table.escape_bin()) return bin - table.bound;
  uint32_t zigzag = DecodeRaw16() << 16;
  zigzag |= DecodeRaw16();
  return static_cast<int32_t>(zigzag >> 1) ^ -static_cast<int32_t>(zigzag & 1);
}

std::vector<uint8_t> RangeEncode(const std::vector<int32_t>& symbols,
                                 const std::vector<int>& table_ids,
                                 const std::vector<CdfTable>& tables) {
  if (symbols.size() != table_ids.size()) {
    throw DimensionError("one table id per symbol is required");
  }
  RangeEncoder enc;
  for (size_t i = 0; i < symbols.size(); ++i) {
    enc.Encode(symbols[i], tables.at(table_ids[i]));
  }
  return enc.Finish();
}

std::vector<int32_t> RangeDecode(std::span<const uint8_t> bytes,
                                 const std::vector<int>& table_ids,
                                 const std::vector<CdfTable>& tables) {
  RangeDecoder dec(bytes);
  std::vector<int32_t> out(table_ids.size());
  for (size_t i = 0; i < out.size(); ++i) {
    out[i] = dec.Decode(tables.at(table_ids[i]));
  }
  return out;
}

std::vector<uint8_t> Bitstream::Serialize() const {
  std::vector<uint8_t> out(kMagic, kMagic + 4);
  out.push_back(version);
  PutU32(out, config_hash);
  out.push_back(lambda_index);
  PutU16(out, height);
  PutU16(out, width);
  PutU16(out, padded_height);
  PutU16(out, padded_width);
  PutU32(out, static_cast<uint32_t>(z_stream.size()));
  out.insert(out.end(), z_stream.begin(), z_stream.end());
  for (const auto& s : slice_streams) {
    PutU32(out, static_cast<uint32_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

Bitstream Bitstream::Parse(std::span<const uint8_t> bytes) {
  Reader r(bytes);
  r.Need(4, "magic");
  if (!std::equal(kMagic, kMagic + 4, bytes.begin())) {
    throw DecodeError("bad magic");
  }
  r.Bytes(4, "magic");
  Bitstream b;
  b.version = r.U8("version");
  if (b.version != kVersion) {
    throw DecodeError("unsupported format version " + std::to_string(b.version));
  }
  b.config_hash = r.U32("config hash");
  b.lambda_index = r.U8("lambda index");
  b.height = r.U16("height");
  b.width = r.U16("width");
  b.padded_height = r.U16("padded height");
  b.padded_width = r.U16("padded width");
  const uint32_t zlen = r.U32("z segment length");
  b.z_stream = r.Bytes(zlen, "z segment");
  while (r.remaining() > 0) {
    const std::string name = "slice segment " + std::to_string(b.slice_streams.size());
    const uint32_t len = r.U32(name + " length");
    b.slice_streams.push_back(r.Bytes(len, name));
  }
  return b;
}

size_t Bitstream::byte_size() const {
  size_t n = 4 + 1 + 4 + 1 + 8 + 4 + z_stream.size();
  for (const auto& s : slice_streams) n += 4 + s.size();
  return n;
}

CodecTables BuildCodecTables(const CompressionModel<float>& model) {
  CodecTables t;
  t.gaussian = BuildCdfTables(ScaleTable());
  const auto& prior = model.entropy.prior;
  const int bound = kSymbolBound;
  // CDF logits at bin edges -L-0.5 ... L+0.5.
  std::vector<double> edges(2 * bound + 2);
  for (int i = 0; i < static_cast<int>(edges.size()); ++i) {
    edges[i] = -bound - 0.5 + i;
  }
  for (int64_t c = 0; c < prior.channels; ++c) {
    const std::vector<double> lg = prior.ChannelLogits(c, edges);
    std::vector<double> p(2 * bound + 2);
    for (int k = 0; k <= 2 * bound; ++k) {
      const double lo = lg[k], hi = lg[k + 1];
      // Difference of upper tails when both edges sit above the median.
      p[k] = lo + hi > 0 ? Logistic(-lo) - Logistic(-hi)
                         : Logistic(hi) - Logistic(lo);
      p[k] = std::max(p[k], 0.0);
    }
    p.back() = Logistic(lg.front()) + Logistic(-lg.back());
    t.prior.push_back(QuantizeProbabilities(p, bound));
  }
  return t;
}

Tensor<float> ReflectPad(const Tensor<float>& x, int64_t height,
                         int64_t width) {
  if (x.rank() != 4 || height < x.dim(2) || width < x.dim(3)) {
    throw DimensionError("cannot pad " + ShapeString(x.shape()));
  }
  const int64_t bc = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor<float> out({x.dim(0), x.dim(1), height, width});
  for (int64_t p = 0; p < bc; ++p) {
    for (int64_t y = 0; y < height; ++y) {
      const float* src = x.data() + (p * h + Mirror(y, h)) * w;
      float* dst = out.data() + (p * height + y) * width;
      for (int64_t xx = 0; xx < width; ++xx) dst[xx] = src[Mirror(xx, w)];
    }
  }
  return out;
}

EncodeResult EncodeImage(const Image& image, const CompressionModel<float>& model,
                         const CodecTables& tables, uint32_t config_hash) {
  if (image.width <= 0 || image.height <= 0 ||
      image.rgb.size() != size_t(image.width) * image.height * 3) {
    throw InputError("encoder needs a non-empty 8-bit RGB image");
  }
  const int64_t mult = model.config.pad_multiple();
  const int64_t ph = (image.height + mult - 1) / mult * mult;
  const int64_t pw = (image.width + mult - 1) / mult * mult;
  if (ph > 0xFFFF || pw > 0xFFFF) throw InputError("image too large");

  NoGradGuard no_grad;
  EncodeResult result;
  Bitstream& b = result.stream;
  b.config_hash = config_hash;
  b.lambda_index = static_cast<uint8_t>(model.config.lambda_index);
  b.height = image.height;
  b.width = image.width;
  b.padded_height = ph;
  b.padded_width = pw;

  Var<float> x(ReflectPad(ImageToTensor(image), ph, pw));
  Var<float> y = model.g_a.Forward(x);
  Var<float> z = model.entropy.h_a(y);
  Var<float> z_hat(Quantize(z.value(), QuantizeMode::kRound));
  b.z_stream = RangeEncode(ToSymbols(z_hat.value()),
                           ChannelIds(z_hat.shape()), tables.prior);
  double bits = Sum(model.entropy.prior.Bits(z_hat)).value()[0];

  SliceContext<float> ctx(model.entropy, model.entropy.h_s(z_hat));
  const SliceLayout& layout = model.entropy.layout;
  for (int i = 0; i < layout.slices; ++i) {
    GaussianParams<float> g = ctx.Predict(i);
    Var<float> residual =
        Sub(Slice(y, 1, layout.begin(i), layout.end(i)), g.mu);
    Var<float> q(Quantize(residual.value(), QuantizeMode::kRound));
    b.slice_streams.push_back(RangeEncode(
        ToSymbols(q.value()), ScaleIds(g.sigma.value()), tables.gaussian));
    bits += Sum(GaussianRate(q, g.sigma)).value()[0];
    ctx.Commit(i, Add(q, g.mu));
  }
  Var<float> x_hat = model.g_s.Forward(Concat(ctx.decoded(), 1));
  result.reconstruction =
      TensorToImage(CropImage(x_hat.value(), image.height, image.width));
  result.estimated_bits = bits;
  return result;
}

Image DecodeImage(const Bitstream& b, const CompressionModel<float>& model,
                  const CodecTables& tables, uint32_t config_hash) {
  if (b.config_hash != config_hash) {
    throw IncompatibleModelError("bitstream was produced by a different model");
  }
  const int64_t mult = model.config.pad_multiple();
  if (b.height == 0 || b.width == 0 || b.padded_height % mult != 0 ||
      b.padded_width % mult != 0 || b.padded_height < b.height ||
      b.padded_width < b.width || b.padded_height - b.height >= mult ||
      b.padded_width - b.width >= mult) {
    throw DecodeError("inconsistent image dimensions in header");
  }
  const SliceLayout& layout = model.entropy.layout;
  if (static_cast<int>(b.slice_streams.size()) != layout.slices) {
    throw DecodeError("expected " + std::to_string(layout.slices) +
                      " slice segments, found " +
                      std::to_string(b.slice_streams.size()));
  }

  NoGradGuard no_grad;
  const int64_t yh = b.padded_height / 16, yw = b.padded_width / 16;
  const Shape z_shape = {1, model.config.z_channels, yh / 4, yw / 4};
  const std::vector<int32_t> z_sym = DecodeSegment(
      b.z_stream, ChannelIds(z_shape), tables.prior, "z segment");
  Var<float> z_hat(FromSymbols(z_sym, z_shape));

  SliceContext<float> ctx(model.entropy, model.entropy.h_s(z_hat));
  for (int i = 0; i < layout.slices; ++i) {
    GaussianParams<float> g = ctx.Predict(i);
    const std::vector<int32_t> sym =
        DecodeSegment(b.slice_streams[i], ScaleIds(g.sigma.value()),
                      tables.gaussian, "slice segment " + std::to_string(i));
    Var<float> q(FromSymbols(sym, g.mu.shape()));
    ctx.Commit(i, Add(q, g.mu));
  }
  Var<float> x_hat = model.g_s.Forward(Concat(ctx.decoded(), 1));
  return TensorToImage(CropImage(x_hat.value(), b.height, b.width));
}

double BitsPerPixel(size_t bytes, int height, int width) {
  return 8.0 * static_cast<double>(bytes) / (double(height) * width);
}

}  // namespace sch
