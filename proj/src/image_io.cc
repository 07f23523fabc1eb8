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

#include "sch/image_io.h"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "sch/errors.h"

namespace sch {
namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

FilePtr Open(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw InputError("cannot open " + path);
  return f;
}

void WriteRows(const std::string& path, int width, int height, int color_type,
               const std::vector<uint8_t>& data, int channels) {
  FilePtr f = Open(path, "wb");
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw InputError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw InputError("failed to write " + path);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(
                           data.data() + size_t(y) * width * channels));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

Image ReadPng(const std::string& path) {
  FilePtr f = Open(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw InputError(path + " is not a PNG file");
  }
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InputError("libpng initialisation failed");
  }
  Image image;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InputError("corrupt PNG " + path);
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (depth == 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InputError(path + ": 16-bit images are not supported");
  }
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  image = Image(png_get_image_width(png, info), png_get_image_height(png, info));
  if (png_get_rowbytes(png, info) != size_t(image.width) * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InputError(path + ": unsupported PNG layout");
  }
  std::vector<png_bytep> rows(image.height);
  for (int y = 0; y < image.height; ++y) {
    rows[y] = image.rgb.data() + size_t(y) * image.width * 3;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

void WritePng(const std::string& path, const Image& image) {
  WriteRows(path, image.width, image.height, PNG_COLOR_TYPE_RGB, image.rgb, 3);
}

void WriteGrayPng(const std::string& path, int width, int height,
                  const std::vector<double>& values) {
  if (values.size() != size_t(width) * height) {
    throw DimensionError("gray image size mismatch");
  }
  std::vector<uint8_t> data(values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    data[i] = static_cast<uint8_t>(
        std::lround(std::clamp(values[i], 0.0, 1.0) * 255.0));
  }
  WriteRows(path, width, height, PNG_COLOR_TYPE_GRAY, data, 1);
}

Tensor<float> ImageToTensor(const Image& image) {
  const int64_t h = image.height, w = image.width;
  Tensor<float> t({1, 3, h, w});
  for (int c = 0; c < 3; ++c) {
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        t[(c * h + y) * w + x] = image.at(y, x, c) / 255.0f;
      }
    }
  }
  return t;
}

Image TensorToImage(const Tensor<float>& t) {
  const bool batched = t.rank() == 4;
  if (!(batched ? t.dim(0) == 1 && t.dim(1) == 3 : t.rank() == 3 && t.dim(0) == 3)) {
    throw DimensionError("expected a single RGB image tensor, got " +
                         ShapeString(t.shape()));
  }
  const int64_t h = t.dim(-2), w = t.dim(-1);
  Image image(w, h);
  for (int c = 0; c < 3; ++c) {
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        const float v = std::clamp(t[(c * h + y) * w + x], 0.0f, 1.0f);
        image.at(y, x, c) = static_cast<uint8_t>(std::lround(v * 255.0f));
      }
    }
  }
  return image;
}

}  // namespace sch
