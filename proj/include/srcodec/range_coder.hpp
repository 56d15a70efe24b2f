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
#include <span>
#include <vector>

namespace srcodec {

inline constexpr int kCdfPrecisionBits = 16;
inline constexpr std::uint32_t kCdfTotal = 1u << kCdfPrecisionBits;

// Cumulative frequency table over S symbols with cdf[0] = 0 and
// cdf[S] = 65536. Every symbol has mass >= 1.
class CdfTable {
 public:
  CdfTable() = default;

  int size() const { return static_cast<int>(cdf_.size()) - 1; }
  std::uint32_t low(int s) const { return cdf_[s]; }
  std::uint32_t mass(int s) const { return cdf_[s + 1] - cdf_[s]; }
  std::span<const std::uint32_t> cdf() const { return cdf_; }

  // Symbol s with cdf[s] <= value < cdf[s+1].
  int find(std::uint32_t value) const;

 private:
  friend void build_cdf(std::span<const double> pmf, CdfTable& table);
  std::vector<std::uint32_t> cdf_;
};

// Quantizes pmf to the 1/65536 grid: every symbol first receives one unit, the
// remaining 65536 - S units are split proportionally (floor), and what is left
// goes to the largest fractional remainders (ties to the lower index).
// Throws ConfigError when S is 0 or exceeds 65536.
void build_cdf(std::span<const double> pmf, CdfTable& table);
CdfTable build_cdf(std::span<const double> pmf);

// Byte-oriented range encoder: 33-bit low with carry propagation through a
// cached byte, 32-bit range renormalized to stay >= 2^24.
class RangeEncoder {
 public:
  void encode(const CdfTable& table, int symbol);
  // Direct interface; `last` hands the rounding slack of the range to the
  // final symbol of the table.
  void encode(std::uint32_t low, std::uint32_t mass, bool last);
  std::vector<std::uint8_t> finish();

 private:
  void shift_low();

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t cache_size_ = 1;
  std::vector<std::uint8_t> out_;
};

class RangeDecoder {
 public:
  // Throws CorruptionError if the stream is shorter than the 5-byte preamble.
  explicit RangeDecoder(std::span<const std::uint8_t> stream);

  // Throws CorruptionError on read past the end of the stream or when the
  // decoder state becomes inconsistent.
  int decode(const CdfTable& table);

  // True once every byte of the stream has been consumed; a valid stream is
  // fully consumed exactly after its last symbol.
  bool exhausted() const { return pos_ == stream_.size(); }
  std::size_t position() const { return pos_; }

 private:
  std::uint8_t next_byte();

  std::span<const std::uint8_t> stream_;
  std::size_t pos_ = 0;
  std::uint32_t code_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
};

}  // namespace srcodec
