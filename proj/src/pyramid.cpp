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

#include "srcodec/pyramid.hpp"

#include <numeric>
#include <string>

#include "srcodec/errors.hpp"

namespace srcodec {

int residual_to_code(int quarter_residual) {
  switch (quarter_residual) {
    case 0: return 0;
    case 1: return 1;
    case 2: return 2;
    case -1: return 3;
    default: throw Error("residual outside {-1, 0, 1, 2}: " + std::to_string(quarter_residual));
  }
}

int code_to_residual(int code) {
  static constexpr int kTable[4] = {0, 1, 2, -1};
  return kTable[code & 3];
}

BlockGeometry block_geometry(int low_w, int low_h, int orig_w, int orig_h, int i, int j) {
  (void)low_w;
  (void)low_h;
  BlockGeometry g;
  g.i = i;
  g.j = j;
  for (int pos = 0; pos < 4; ++pos) {
    const int y = 2 * i + kBlockOffsets[pos][0];
    const int x = 2 * j + kBlockOffsets[pos][1];
    g.present[pos] = y < orig_h && x < orig_w;
    if (g.present[pos]) {
      ++g.count;
      g.free_pos = pos;
    }
  }
  return g;
}

Downsampled downsample(const Image& image) {
  Downsampled out;
  const int lw = ceil_half(image.width);
  const int lh = ceil_half(image.height);
  out.low = Image(lw, lh);
  out.avg = AveragePlane{lw, lh, std::vector<std::int32_t>(static_cast<std::size_t>(lw) * lh * kChannels)};
  out.residual = ResidualPlane{lw, lh, std::vector<std::uint8_t>(out.avg.quarters.size())};

  for (int i = 0; i < lh; ++i) {
    for (int j = 0; j < lw; ++j) {
      const BlockGeometry g = block_geometry(lw, lh, image.width, image.height, i, j);
      for (int c = 0; c < kChannels; ++c) {
        int sum = 0;
        for (int pos = 0; pos < 4; ++pos)
          if (g.present[pos])
            sum += image.at(2 * j + kBlockOffsets[pos][1], 2 * i + kBlockOffsets[pos][0], c);
        // 4*y = 4*sum/p; p divides 4 so this is exact.
        const int q = sum * (4 / g.count);
        const int x = round_half_down(q);
        const std::size_t idx = (static_cast<std::size_t>(i) * lw + j) * kChannels + c;
        out.avg.quarters[idx] = q;
        out.low.data[idx] = static_cast<std::uint8_t>(x);
        out.residual.codes[idx] = static_cast<std::uint8_t>(residual_to_code(q - 4 * x));
      }
    }
  }
  return out;
}

AveragePlane reconstruct_average(const Image& low, const ResidualPlane& residual) {
  if (low.width != residual.width || low.height != residual.height)
    throw CorruptionError("residual plane does not match image dimensions");
  AveragePlane avg{low.width, low.height, std::vector<std::int32_t>(low.data.size())};
  for (std::size_t k = 0; k < low.data.size(); ++k)
    avg.quarters[k] = 4 * low.data[k] + code_to_residual(residual.codes[k]);
  return avg;
}

int block_sum(int avg_quarters, int count) {
  const int scaled = avg_quarters * count;
  if (avg_quarters < 0 || avg_quarters > 1020 || scaled % 4 != 0)
    throw CorruptionError("block average " + std::to_string(avg_quarters) +
                          "/4 is inconsistent with " + std::to_string(count) + " pixels");
  return scaled / 4;
}

std::uint8_t free_pixel(int avg_quarters, int count, std::span<const std::uint8_t> decoded) {
  const int sum = block_sum(avg_quarters, count);
  const int rest = std::accumulate(decoded.begin(), decoded.end(), 0);
  const int value = sum - rest;
  if (value < 0 || value > 255)
    throw CorruptionError("reconstructed pixel " + std::to_string(value) + " outside [0, 255]");
  return static_cast<std::uint8_t>(value);
}

Pyramid build_pyramid(const Image& image, int levels) {
  if (image.empty()) throw ConfigError("cannot build a pyramid of an empty image");
  if (levels < 0 || levels > kMaxLevels) throw ConfigError("level count out of range");
  Pyramid pyr;
  pyr.levels.push_back(image);
  for (int l = 0; l < levels; ++l) {
    Downsampled d = downsample(pyr.levels.back());
    pyr.levels.push_back(std::move(d.low));
    pyr.averages.push_back(std::move(d.avg));
    pyr.residuals.push_back(std::move(d.residual));
  }
  return pyr;
}

}  // namespace srcodec
