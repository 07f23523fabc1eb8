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

#ifndef SCH_IMAGE_IO_H_
#define SCH_IMAGE_IO_H_

#include <cstdint>
#include <string>
#include <vector>

#include "sch/tensor.h"

namespace sch {

// Interleaved 8-bit RGB.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> rgb;

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(size_t(w) * h * 3, 0) {}
  uint8_t& at(int y, int x, int c) { return rgb[(size_t(y) * width + x) * 3 + c]; }
  uint8_t at(int y, int x, int c) const {
    return rgb[(size_t(y) * width + x) * 3 + c];
  }
  bool operator==(const Image& o) const {
    return width == o.width && height == o.height && rgb == o.rgb;
  }
};

// Reads an 8-bit PNG. Gray, palette and alpha variants are converted to RGB;
// 16-bit samples raise InputError.
Image ReadPng(const std::string& path);
void WritePng(const std::string& path, const Image& image);
// 8-bit grayscale output; `values` are row-major in [0, 1].
void WriteGrayPng(const std::string& path, int width, int height,
                  const std::vector<double>& values);

// [1, 3, H, W] in [0, 1].
Tensor<float> ImageToTensor(const Image& image);
// Clamps to [0, 1] and rounds to 8 bits. Accepts [1, 3, H, W] or [3, H, W].
Image TensorToImage(const Tensor<float>& t);

}  // namespace sch

#endif  // SCH_IMAGE_IO_H_
