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

#include <climits>
#include <cmath>
#include <numeric>

#include "sch/codec.h"
#include "sch/errors.h"
#include "sch/image_io.h"
#include "sch/model.h"
#include "test_util.h"

namespace sch {
namespace {

TEST(Quantize, RoundsHalfAwayFromZero) {
  EXPECT_EQ(QuantizeRound(1.4), 1);
  EXPECT_EQ(QuantizeRound(-1.4), -1);
  EXPECT_EQ(QuantizeRound(1.5), 2);
  EXPECT_EQ(QuantizeRound(-1.5), -2);
  EXPECT_EQ(QuantizeRound(0.5), 1);
  Rng rng(1);
  Tensor<double> v = testing::RandomTensor<double>({1000}, rng, -50, 50);
  Tensor<double> q = Quantize(v, QuantizeMode::kRound);
  for (int64_t i = 0; i < v.numel(); ++i) {
    EXPECT_LE(std::abs(q[i] - v[i]), 0.5);
    EXPECT_EQ(q[i], std::round(q[i]));
  }
}

TEST(Quantize, NoiseStaysWithinHalf) {
  Rng rng(2);
  Tensor<double> v({5000}, 3.25);
  Tensor<double> n = Quantize(v, QuantizeMode::kNoise, &rng);
  double mean = 0;
  for (int64_t i = 0; i < n.numel(); ++i) {
    EXPECT_LE(std::abs(n[i] - 3.25), 0.5);
    mean += n[i] - 3.25;
  }
  EXPECT_NEAR(mean / n.numel(), 0.0, 0.02);
  EXPECT_THROW(Quantize(v, QuantizeMode::kNoise), ConfigError);
}

TEST(ScaleTable, LogSpacedAndIndexed) {
  const std::vector<double>& s = ScaleTable();
  ASSERT_EQ(s.size(), 64u);
  EXPECT_DOUBLE_EQ(s.front(), 0.11);
  EXPECT_NEAR(s.back(), 256.0, 1e-9);
  const double ratio = std::pow(256.0 / 0.11, 1.0 / 63);
  for (size_t i = 1; i < s.size(); ++i) {
    EXPECT_GT(s[i], s[i - 1]);
    EXPECT_NEAR(s[i] / s[i - 1], ratio, 1e-12);
  }
  // Smallest table scale that is not below sigma.
  EXPECT_EQ(ScaleIndex(0.01), 0);
  EXPECT_EQ(ScaleIndex(0.11), 0);
  EXPECT_EQ(ScaleIndex(s[10]), 10);
  EXPECT_EQ(ScaleIndex(s[10] * 1.0001), 11);
  EXPECT_EQ(ScaleIndex(1e6), 63);
}

TEST(CdfTables, MonotoneFullMassAndSymmetric) {
  std::vector<CdfTable> tables = BuildCdfTables(ScaleTable());
  ASSERT_EQ(tables.size(), 64u);
  for (const CdfTable& t : tables) {
    ASSERT_EQ(t.num_bins(), 2 * 255 + 2);
    EXPECT_EQ(t.cdf.front(), 0u);
    EXPECT_EQ(t.cdf.back(), kTotalFrequency);
    for (int b = 0; b < t.num_bins(); ++b) ASSERT_GE(t.frequency(b), 1u);
    const uint32_t symbols = t.cdf[t.escape_bin()];
    for (int k = 0; k <= 255; ++k) {
      EXPECT_EQ(t.frequency(255 + k), t.frequency(255 - k));
      EXPECT_EQ(t.cdf[255 + k + 1] + t.cdf[255 - k], symbols);
    }
  }
  // Same input, same integers.
  EXPECT_EQ(BuildGaussianTable(3.7).cdf, BuildGaussianTable(3.7).cdf);
}

TEST(CdfTables, RejectsBadProbabilities) {
  EXPECT_THROW(QuantizeProbabilities({0.5, 0.5}, 2), DimensionError);
  EXPECT_THROW(QuantizeProbabilities({0, 0, 0, 0}, 1), ConfigError);
  EXPECT_THROW(QuantizeProbabilities({1, -1, 0, 0}, 1), ConfigError);
}

std::vector<CdfTable> RandomTables(Rng& rng, int count) {
  std::vector<CdfTable> tables;
  std::gamma_distribution<double> g(0.3);
  std::uniform_real_distribution<double> s(0.2, 40.0);
  for (int t = 0; t < count; ++t) {
    if (t % 2 == 0) {
      tables.push_back(BuildGaussianTable(s(rng)));
    } else {
      std::vector<double> p(2 * kSymbolBound + 2);
      for (double& v : p) v = g(rng) + 1e-9;
      tables.push_back(QuantizeProbabilities(p, kSymbolBound));
    }
  }
  return tables;
}

// Draws a bin with the table's own probabilities.
int DrawBin(const CdfTable& t, Rng& rng) {
  std::uniform_int_distribution<uint32_t> u(0, kTotalFrequency - 1);
  const uint32_t r = u(rng);
  return static_cast<int>(std::upper_bound(t.cdf.begin(), t.cdf.end(), r) - t.cdf.begin()) - 1;
}

TEST(RangeCoder, RoundTripsRandomSymbolsWithEscapes) {
  Rng rng(3);
  std::vector<CdfTable> tables = RandomTables(rng, 20);
  std::uniform_int_distribution<int> pick(0, 19);
  std::uniform_int_distribution<int32_t> wide(INT32_MIN, INT32_MAX);
  std::vector<int32_t> symbols;
  std::vector<int> ids;
  for (int i = 0; i < 100000; ++i) {
    const int id = pick(rng);
    const int bin = DrawBin(tables[id], rng);
    int32_t sym = bin - kSymbolBound;
    if (bin == tables[id].escape_bin()) {
      sym = wide(rng);
      if (std::abs(int64_t(sym)) <= kSymbolBound) sym = 1000;
    }
    symbols.push_back(sym);
    ids.push_back(id);
  }
  for (int32_t extreme : {INT32_MIN, INT32_MAX, 256, -256}) {
    symbols.push_back(extreme);
    ids.push_back(0);
  }
  std::vector<uint8_t> bytes = RangeEncode(symbols, ids, tables);
  EXPECT_EQ(RangeDecode(bytes, ids, tables), symbols);
}

TEST(RangeCoder, LengthNearShannonBound) {
  Rng rng(4);
  std::vector<CdfTable> tables = RandomTables(rng, 20);
  for (int id = 0; id < 20; ++id) {
    const CdfTable& t = tables[id];
    std::vector<int32_t> symbols;
    double bits = 0;
    for (int i = 0; i < 5000; ++i) {
      const int bin = DrawBin(t, rng);
      bits += -std::log2(t.frequency(bin) / double(kTotalFrequency));
      if (bin == t.escape_bin()) {
        symbols.push_back(-7777);
        bits += 32;  // fixed-width payload
      } else {
        symbols.push_back(bin - kSymbolBound);
      }
    }
    std::vector<int> ids(symbols.size(), id);
    std::vector<uint8_t> bytes = RangeEncode(symbols, ids, tables);
    EXPECT_LE(double(bytes.size()), 1.01 * bits / 8 + 32) << "table " << id;
    EXPECT_EQ(RangeDecode(bytes, ids, tables), symbols);
  }
}

TEST(RangeCoder, EmptyStreamIsTiny) {
  std::vector<uint8_t> bytes = RangeEncode({}, {}, BuildCdfTables({1.0}));
  EXPECT_LE(bytes.size(), 8u);
  EXPECT_TRUE(RangeDecode(bytes, {}, BuildCdfTables({1.0})).empty());
}

TEST(RangeCoder, TruncatedInputFails) {
  Rng rng(5);
  std::vector<CdfTable> tables = BuildCdfTables({0.5, 4.0});
  std::vector<int32_t> symbols;
  std::vector<int> ids;
  for (int i = 0; i < 2000; ++i) {
    ids.push_back(i % 2);
    symbols.push_back(DrawBin(tables[i % 2], rng) - kSymbolBound);
    if (std::abs(symbols.back()) > kSymbolBound) symbols.back() = 0;
  }
  std::vector<uint8_t> bytes = RangeEncode(symbols, ids, tables);
  bytes.resize(bytes.size() / 2);
  EXPECT_THROW(RangeDecode(bytes, ids, tables), DecodeError);
}

Bitstream SampleStream() {
  Bitstream b;
  b.config_hash = 0xDEADBEEF;
  b.lambda_index = 3;
  b.height = 500;
  b.width = 333;
  b.padded_height = 512;
  b.padded_width = 384;
  b.z_stream = {1, 2, 3};
  b.slice_streams = {{4, 5}, {}, {6, 7, 8, 9}};
  return b;
}

TEST(Bitstream, SerializeParseRoundTrip) {
  Bitstream b = SampleStream();
  std::vector<uint8_t> bytes = b.Serialize();
  EXPECT_EQ(bytes.size(), b.byte_size());
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "SCH1");
  Bitstream p = Bitstream::Parse(bytes);
  EXPECT_EQ(p.config_hash, b.config_hash);
  EXPECT_EQ(p.lambda_index, 3);
  EXPECT_EQ(p.height, 500);
  EXPECT_EQ(p.width, 333);
  EXPECT_EQ(p.padded_height, 512);
  EXPECT_EQ(p.padded_width, 384);
  EXPECT_EQ(p.z_stream, b.z_stream);
  EXPECT_EQ(p.slice_streams, b.slice_streams);
}

TEST(Bitstream, TruncationAndCorruptionFailCleanly) {
  std::vector<uint8_t> bytes = SampleStream().Serialize();
  for (size_t n = 0; n < bytes.size(); ++n) {
    std::vector<uint8_t> cut(bytes.begin(), bytes.begin() + n);
    // Cutting exactly at a segment boundary leaves a valid shorter stream.
    try {
      Bitstream p = Bitstream::Parse(cut);
      EXPECT_LT(p.slice_streams.size(), 3u) << n;
    } catch (const DecodeError&) {
    }
  }
  std::vector<uint8_t> bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(Bitstream::Parse(bad), DecodeError);
  bad = bytes;
  bad[4] = 9;  // version
  EXPECT_THROW(Bitstream::Parse(bad), DecodeError);
  EXPECT_THROW(Bitstream::Parse(std::vector<uint8_t>(bytes.begin(), bytes.begin() + 10)),
               DecodeError);
}

TEST(Bitrate, PerOriginalPixel) {
  EXPECT_NEAR(BitsPerPixel(4096, 512, 768), 0.08333, 1e-5);
  EXPECT_DOUBLE_EQ(BitsPerPixel(4096, 512, 768), 4096.0 * 8 / (512 * 768));
}

TEST(ReflectPad, MirrorsWithoutRepeatingTheEdge) {
  Tensor<float> x({1, 1, 3, 4});
  for (int64_t i = 0; i < 12; ++i) x[i] = float(i);
  Tensor<float> same = ReflectPad(x, 3, 4);
  EXPECT_EQ(same.storage(), x.storage());
  Tensor<float> p = ReflectPad(x, 5, 7);
  // Rows 0 1 2 1 0, columns 0 1 2 3 2 1 0.
  const int rows[] = {0, 1, 2, 1, 0}, cols[] = {0, 1, 2, 3, 2, 1, 0};
  for (int r = 0; r < 5; ++r) {
    for (int c = 0; c < 7; ++c) EXPECT_EQ(p[r * 7 + c], x[rows[r] * 4 + cols[c]]);
  }
  EXPECT_THROW(ReflectPad(x, 2, 4), DimensionError);
}

Image CropOf(const Image& src, int x0, int y0, int w, int h) {
  Image out;
  out.width = w;
  out.height = h;
  out.rgb.resize(size_t(w) * h * 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        out.rgb[(size_t(y) * w + x) * 3 + c] = src.at(y0 + y, x0 + x, c);
      }
    }
  }
  return out;
}

class CodecPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    model_ = new CompressionModel<float>(ModelConfig::Toy(), 11);
    hash_ = model_->Fingerprint();
    tables_ = new CodecTables(BuildCodecTables(*model_));
  }
  static void TearDownTestSuite() {
    delete tables_;
    delete model_;
  }
  static CompressionModel<float>* model_;
  static CodecTables* tables_;
  static uint32_t hash_;
};

CompressionModel<float>* CodecPipeline::model_ = nullptr;
CodecTables* CodecPipeline::tables_ = nullptr;
uint32_t CodecPipeline::hash_ = 0;

TEST_F(CodecPipeline, DecoderReproducesEncoderReconstruction) {
  Image full = ReadPng(std::string(SCH_TESTDATA) + "/test/coins.png");
  for (auto [w, h] : {std::pair{64, 64}, {100, 70}, {130, 66}}) {
    Image img = CropOf(full, 7, 5, w, h);
    EncodeResult enc = EncodeImage(img, *model_, *tables_, hash_);
    EXPECT_EQ(enc.stream.height, h);
    EXPECT_EQ(enc.stream.width, w);
    EXPECT_EQ(enc.stream.padded_height % 64, 0);
    EXPECT_EQ(enc.stream.padded_width % 64, 0);
    EXPECT_EQ(enc.stream.slice_streams.size(), size_t(model_->config.slices));
    EXPECT_GT(enc.estimated_bits, 0.0);
    std::vector<uint8_t> bytes = enc.stream.Serialize();
    Image dec = DecodeImage(Bitstream::Parse(bytes), *model_, *tables_, hash_);
    EXPECT_EQ(dec.width, w);
    EXPECT_EQ(dec.height, h);
    EXPECT_TRUE(dec == enc.reconstruction) << w << "x" << h;
  }
}

TEST_F(CodecPipeline, RejectsForeignModelAndBrokenSegments) {
  Image img = CropOf(ReadPng(std::string(SCH_TESTDATA) + "/test/moon.png"), 0, 0, 64, 64);
  EncodeResult enc = EncodeImage(img, *model_, *tables_, hash_);
  EXPECT_THROW(DecodeImage(enc.stream, *model_, *tables_, hash_ ^ 1), IncompatibleModelError);
  Bitstream missing = enc.stream;
  missing.slice_streams.pop_back();
  EXPECT_THROW(DecodeImage(missing, *model_, *tables_, hash_), DecodeError);
  Bitstream cut = enc.stream;
  cut.z_stream.clear();
  EXPECT_THROW(DecodeImage(cut, *model_, *tables_, hash_), DecodeError);
}

TEST_F(CodecPipeline, RejectsEmptyImage) {
  EXPECT_THROW(EncodeImage(Image{}, *model_, *tables_, hash_), InputError);
}

}  // namespace
}  // namespace sch
