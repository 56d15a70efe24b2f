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

#include "srcodec/image.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iterator>
#include <string>

#include "srcodec/errors.hpp"

namespace srcodec {

Image::Image(int w, int h, std::uint8_t fill)
    : width(w),
      height(h),
      data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * kChannels,
           fill) {}

Image crop(const Image& image, int x0, int y0, int w, int h) {
  if (x0 < 0 || y0 < 0 || w <= 0 || h <= 0 || x0 + w > image.width ||
      y0 + h > image.height) {
    throw ConfigError("crop window outside image");
  }
  Image out(w, h);
  for (int y = 0; y < h; ++y) {
    const auto* src = &image.data[(static_cast<std::size_t>(y0 + y) * image.width + x0) * kChannels];
    std::copy_n(src, static_cast<std::size_t>(w) * kChannels,
                &out.data[static_cast<std::size_t>(y) * w * kChannels]);
  }
  return out;
}

Image flip_horizontal(const Image& image) {
  Image out(image.width, image.height);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < kChannels; ++c)
        out.at(image.width - 1 - x, y, c) = image.at(x, y, c);
  return out;
}

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  int next_int() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_]))
      throw FormatError("PPM: expected an integer in header");
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_++] - '0');
      if (value > (1L << 30)) throw FormatError("PPM: header value too large");
    }
    return static_cast<int>(value);
  }

  // Exactly one whitespace byte separates maxval from the raster.
  void skip_single_space() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_]))
      throw FormatError("PPM: missing whitespace before raster");
    ++pos_;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t read_u32le(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) |
         (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

}  // namespace

Image decode_ppm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6')
    throw FormatError("PPM: missing P6 magic");
  HeaderReader reader(bytes);
  reader.advance(2);
  const int width = reader.next_int();
  const int height = reader.next_int();
  const int maxval = reader.next_int();
  if (maxval != 255) throw FormatError("PPM: only maxval 255 is supported");
  if (width <= 0 || height <= 0) throw FormatError("PPM: empty image");
  if (width > kMaxDimension || height > kMaxDimension)
    throw FormatError("PPM: unsupported dimensions");
  reader.skip_single_space();
  Image image(width, height);
  if (bytes.size() - reader.pos() < image.data.size())
    throw FormatError("PPM: truncated raster");
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(reader.pos()), image.data.size(),
              image.data.begin());
  return image;
}

std::vector<std::uint8_t> encode_ppm(const Image& image) {
  const std::string header = "P6\n" + std::to_string(image.width) + " " +
                             std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.data.begin(), image.data.end());
  return out;
}

Image decode_raw_rgb(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) throw FormatError("raw: truncated header");
  const std::uint32_t w = read_u32le(bytes, 0);
  const std::uint32_t h = read_u32le(bytes, 4);
  if (w == 0 || h == 0 || w > kMaxDimension || h > kMaxDimension)
    throw FormatError("raw: unsupported dimensions");
  Image image(static_cast<int>(w), static_cast<int>(h));
  if (bytes.size() - 8 != image.data.size()) throw FormatError("raw: size mismatch");
  std::copy(bytes.begin() + 8, bytes.end(), image.data.begin());
  return image;
}

std::vector<std::uint8_t> encode_raw_rgb(const Image& image) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + image.data.size());
  put_u32le(out, static_cast<std::uint32_t>(image.width));
  put_u32le(out, static_cast<std::uint32_t>(image.height));
  out.insert(out.end(), image.data.begin(), image.data.end());
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path.string());
}

Image read_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return decode_ppm(bytes);
  return decode_raw_rgb(bytes);
}

void write_image(const Image& image, const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".rgb" || ext == ".raw") {
    write_file(path, encode_raw_rgb(image));
  } else {
    write_file(path, encode_ppm(image));
  }
}

}  // namespace srcodec
