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

#ifndef SCH_CODEC_H_
#define SCH_CODEC_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sch/image_io.h"
#include "sch/model.h"

namespace sch {

enum class QuantizeMode { kRound, kNoise };

// Nearest integer, ties away from zero.
double QuantizeRound(double v);
template <typename T>
Tensor<T> Quantize(const Tensor<T>& v, QuantizeMode mode, Rng* rng = nullptr);

inline constexpr int kScaleCount = 64;
inline constexpr int kSymbolBound = 255;  // L
inline constexpr int kPrecisionBits = 16;
inline constexpr uint32_t kTotalFrequency = 1u << kPrecisionBits;

// 64 log-spaced scales over [kScaleMin, kScaleMax].
const std::vector<double>& ScaleTable();
// Smallest table entry >= sigma; sigmas past either end map to the end.
int ScaleIndex(double sigma);

// Integer CDF over symbols [-L, L] followed by one escape bin.
struct CdfTable {
  int bound = kSymbolBound;
  std::vector<uint32_t> cdf;  // 2L + 3 entries, cdf[0] = 0, back = 2^16

  int num_bins() const { return static_cast<int>(cdf.size()) - 1; }
  int escape_bin() const { return 2 * bound + 1; }
  uint32_t frequency(int bin) const { return cdf[bin + 1] - cdf[bin]; }
};

// Quantises bin probabilities (2L + 2 values, escape last) to a table:
// freq = 1 + floor(p * (2^16 - bins)), remainder to the centre bin.
CdfTable QuantizeProbabilities(const std::vector<double>& probs, int bound);
CdfTable BuildGaussianTable(double scale, int bound = kSymbolBound);
std::vector<CdfTable> BuildCdfTables(const std::vector<double>& scales,
                                     int bound = kSymbolBound);

// LZMA-style range coder: 32-bit range, 64-bit low with carry propagation,
// 16-bit probabilities. Symbols outside [-L, L] are sent through the escape
// bin followed by a raw 32-bit payload.
class RangeEncoder {
 public:
  void Encode(int32_t symbol, const CdfTable& table);
  void EncodeBin(int bin, const CdfTable& table);
  void EncodeRaw16(uint32_t value);
  std::vector<uint8_t> Finish();

 private:
  void Code(uint32_t start, uint32_t size);
  void ShiftLow();

  uint64_t low_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint8_t cache_ = 0;
  uint64_t cache_size_ = 1;
  bool first_ = true;
  std::vector<uint8_t> out_;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const uint8_t> data);
  int32_t Decode(const CdfTable& table);
  int DecodeBin(const CdfTable& table);
  uint32_t DecodeRaw16();

 private:
  uint32_t Target();
  void Consume(uint32_t start, uint32_t size);
  uint8_t Next();

  std::span<const uint8_t> data_;
  size_t pos_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint32_t code_ = 0;
};

std::vector<uint8_t> RangeEncode(const std::vector<int32_t>& symbols,
                                 const std::vector<int>& table_ids,
                                 const std::vector<CdfTable>& tables);
std::vector<int32_t> RangeDecode(std::span<const uint8_t> bytes,
                                 const std::vector<int>& table_ids,
                                 const std::vector<CdfTable>& tables);

struct Bitstream {
  static constexpr char kMagic[5] = "SCH1";
  static constexpr uint8_t kVersion = 1;

  uint8_t version = kVersion;
  uint32_t config_hash = 0;
  uint8_t lambda_index = 0;
  uint16_t height = 0, width = 0;
  uint16_t padded_height = 0, padded_width = 0;
  std::vector<uint8_t> z_stream;
  std::vector<std::vector<uint8_t>> slice_streams;

  std::vector<uint8_t> Serialize() const;
  // Raises DecodeError on bad magic, unknown version or truncation.
  static Bitstream Parse(std::span<const uint8_t> bytes);
  size_t byte_size() const;
};

// Tables that depend on the model: the shared Gaussian set plus one table per
// hyper-latent channel.
struct CodecTables {
  std::vector<CdfTable> gaussian;
  std::vector<CdfTable> prior;
};
CodecTables BuildCodecTables(const CompressionModel<float>& model);

// Reflect padding of [B, C, H, W] to the given size.
Tensor<float> ReflectPad(const Tensor<float>& x, int64_t height, int64_t width);

struct EncodeResult {
  Bitstream stream;
  Image reconstruction;      // encoder-side decode, cropped and rounded
  double estimated_bits = 0; // entropy-model rate of the coded latents
};

// `model` must be the float model whose Fingerprint() is `config_hash`.
EncodeResult EncodeImage(const Image& image, const CompressionModel<float>& model,
                         const CodecTables& tables, uint32_t config_hash);
Image DecodeImage(const Bitstream& stream, const CompressionModel<float>& model,
                  const CodecTables& tables, uint32_t config_hash);

double BitsPerPixel(size_t bytes, int height, int width);

}  // namespace sch

#endif  // SCH_CODEC_H_
