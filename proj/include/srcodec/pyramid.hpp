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

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "srcodec/image.hpp"

namespace srcodec {

inline constexpr int kMaxLevels = 8;

// Position of a pixel inside a 2x2 block, in coding order.
enum BlockPos : int { kTopLeft = 0, kTopRight = 1, kBottomLeft = 2, kBottomRight = 3 };

// (dy, dx) of each block position.
inline constexpr std::array<std::array<int, 2>, 4> kBlockOffsets = {
    {{0, 0}, {0, 1}, {1, 0}, {1, 1}}};

// Block averages y stored as 4*y. Border blocks average only the pixels that
// exist, so 4*y = 4*sum/p is always an integer in [0, 1020].
struct AveragePlane {
  int width = 0;
  int height = 0;
  std::vector<std::int32_t> quarters;  // row-major, channel-interleaved

  std::int32_t at(int x, int y, int c) const {
    return quarters[(static_cast<std::size_t>(y) * width + x) * kChannels + c];
  }
  std::int32_t& at(int x, int y, int c) {
    return quarters[(static_cast<std::size_t>(y) * width + x) * kChannels + c];
  }
};

// Rounding residuals r = 4*(y - x) as 2-bit codes: 0 -> 0, 1 -> +1, 2 -> +2,
// 3 -> -1 (quarter units).
struct ResidualPlane {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> codes;

  friend bool operator==(const ResidualPlane&, const ResidualPlane&) = default;
};

int residual_to_code(int quarter_residual);
int code_to_residual(int code);

struct Downsampled {
  Image low;
  ResidualPlane residual;
  AveragePlane avg;
};

struct Pyramid {
  std::vector<Image> levels;            // x^(0) .. x^(L)
  std::vector<AveragePlane> averages;   // y^(1) .. y^(L), averages[l-1] = y^(l)
  std::vector<ResidualPlane> residuals; // r^(1) .. r^(L)

  int depth() const { return static_cast<int>(averages.size()); }
};

struct BlockGeometry {
  int i = 0;  // block row
  int j = 0;  // block column
  std::array<bool, 4> present{};
  int count = 0;     // real pixels covered, 1, 2 or 4
  int free_pos = 0;  // last present position; reconstructed, never coded

  bool coded(int pos) const { return present[pos] && pos != free_pos; }
};

// Smallest x with 4*y - 4*x in {-1, 0, 1, 2}, i.e. x = ceil(y - 1/2).
constexpr int round_half_down(int quarters) { return (quarters + 1) / 4; }

constexpr int ceil_half(int n) { return (n + 1) / 2; }

Downsampled downsample(const Image& image);

// Rebuilds 4*y from the rounded image and its residual codes.
AveragePlane reconstruct_average(const Image& low, const ResidualPlane& residual);

// Sum of the real pixels of a block, p*y. Throws CorruptionError when avgQ is
// not compatible with a block of p pixels.
int block_sum(int avg_quarters, int count);

// Closed-form value of the last pixel of a block. Throws CorruptionError when
// the result falls outside [0, 255].
std::uint8_t free_pixel(int avg_quarters, int count, std::span<const std::uint8_t> decoded);

Pyramid build_pyramid(const Image& image, int levels = 3);

BlockGeometry block_geometry(int low_w, int low_h, int orig_w, int orig_h, int i, int j);

// Dimension of level l for an original extent n.
constexpr int level_extent(int n, int level) {
  for (int l = 0; l < level; ++l) n = ceil_half(n);
  return n;
}

}  // namespace srcodec
