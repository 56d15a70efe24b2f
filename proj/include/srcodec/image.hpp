// Copyright 2026 The srcodec Authors. All Rights Reserved.
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

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace srcodec {

inline constexpr int kChannels = 3;

inline constexpr int kMaxDimension = 1 << 16;

// 8-bit RGB raster, row-major, channels interleaved.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  Image() = default;
  Image(int w, int h, std::uint8_t fill = 0);

  bool empty() const { return width <= 0 || height <= 0; }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  std::size_t subpixel_count() const { return pixel_count() * kChannels; }

  std::uint8_t& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * kChannels + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * kChannels + c];
  }

  friend bool operator==(const Image&, const Image&) = default;
};

// Crops a w x h window whose top-left corner is (x0, y0).
Image crop(const Image& image, int x0, int y0, int w, int h);
Image flip_horizontal(const Image& image);

// Binary PPM (P6, maxval 255).
Image decode_ppm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_ppm(const Image& image);

// Raw format: 32-bit little-endian width, 32-bit little-endian height, then
// width*height*3 bytes of RGB8.
Image decode_raw_rgb(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_raw_rgb(const Image& image);

// Picks the format from the content (PPM magic) or falls back to raw.
Image read_image(const std::filesystem::path& path);
// Writes raw when the extension is .rgb or .raw, PPM otherwise.
void write_image(const Image& image, const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path,
                std::span<const std::uint8_t> bytes);

}  // namespace srcodec
