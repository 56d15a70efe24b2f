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

#include "srcodec/range_coder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "srcodec/errors.hpp"

namespace srcodec {

namespace {
constexpr std::uint32_t kTop = 1u << 24;
}

int CdfTable::find(std::uint32_t value) const {
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), value);
  return static_cast<int>(it - cdf_.begin()) - 1;
}

void build_cdf(std::span<const double> pmf, CdfTable& table) {
  const std::size_t n = pmf.size();
  if (n == 0 || n > kCdfTotal) throw ConfigError("CDF symbol count out of range");

  double total = 0.0;
  for (double p : pmf) total += std::max(p, 0.0);

  thread_local std::vector<std::uint32_t> mass;
  thread_local std::vector<double> remainder;
  thread_local std::vector<std::uint32_t> order;
  mass.assign(n, 1);
  remainder.assign(n, 0.0);

  const std::uint32_t spare = kCdfTotal - static_cast<std::uint32_t>(n);
  std::uint32_t assigned = 0;
  if (total > 0.0 && std::isfinite(total)) {
    const double scale = static_cast<double>(spare) / total;
    for (std::size_t s = 0; s < n; ++s) {
      const double share = std::max(pmf[s], 0.0) * scale;
      const double whole = std::floor(share);
      mass[s] += static_cast<std::uint32_t>(whole);
      remainder[s] = share - whole;
      assigned += static_cast<std::uint32_t>(whole);
    }
  } else {
    std::fill(remainder.begin(), remainder.end(), 1.0);
  }
  if (assigned > spare) assigned = spare;  // guards floating-point overshoot
  std::uint32_t left = spare - assigned;

  // Whole rounds only happen for degenerate input; the rest goes to the
  // largest remainders, ties to the lower index.
  if (left >= n) {
    const auto rounds = static_cast<std::uint32_t>(left / n);
    for (auto& v : mass) v += rounds;
    left -= rounds * static_cast<std::uint32_t>(n);
  }
  if (left > 0) {
    order.resize(n);
    std::iota(order.begin(), order.end(), 0u);
    auto before = [&](std::uint32_t a, std::uint32_t b) {
      return remainder[a] > remainder[b] || (remainder[a] == remainder[b] && a < b);
    };
    std::nth_element(order.begin(), order.begin() + (left - 1), order.end(), before);
    for (std::size_t k = 0; k < left; ++k) ++mass[order[k]];
  }

  auto& cdf = table.cdf_;
  cdf.resize(n + 1);
  cdf[0] = 0;
  for (std::size_t s = 0; s < n; ++s) cdf[s + 1] = cdf[s] + mass[s];
  if (cdf[n] != kCdfTotal) {
    // Only reachable if overshoot clamping above kicked in; rebalance on the
    // largest symbol.
    const auto big = static_cast<std::size_t>(
        std::max_element(mass.begin(), mass.end()) - mass.begin());
    const std::int64_t diff = static_cast<std::int64_t>(kCdfTotal) - cdf[n];
    mass[big] = static_cast<std::uint32_t>(static_cast<std::int64_t>(mass[big]) + diff);
    for (std::size_t s = 0; s < n; ++s) cdf[s + 1] = cdf[s] + mass[s];
  }
}

CdfTable build_cdf(std::span<const double> pmf) {
  CdfTable table;
  build_cdf(pmf, table);
  return table;
}

void RangeEncoder::encode(const CdfTable& table, int symbol) {
  encode(table.low(symbol), table.mass(symbol), symbol == table.size() - 1);
}

void RangeEncoder::encode(std::uint32_t low, std::uint32_t mass, bool last) {
  const std::uint32_t r = range_ >> kCdfPrecisionBits;
  low_ += static_cast<std::uint64_t>(r) * low;
  range_ = last ? range_ - r * low : r * mass;
  while (range_ < kTop) {
    range_ <<= 8;
    shift_low();
  }
}

void RangeEncoder::shift_low() {
  if (static_cast<std::uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    const auto carry = static_cast<std::uint8_t>(low_ >> 32);
    std::uint8_t temp = cache_;
    do {
      out_.push_back(static_cast<std::uint8_t>(temp + carry));
      temp = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = static_cast<std::uint8_t>(low_ >> 24);
  }
  ++cache_size_;
  low_ = (low_ & 0x00FFFFFFu) << 8;
}

std::vector<std::uint8_t> RangeEncoder::finish() {
  for (int k = 0; k < 5; ++k) shift_low();
  std::vector<std::uint8_t> out = std::move(out_);
  *this = RangeEncoder();
  return out;
}

RangeDecoder::RangeDecoder(std::span<const std::uint8_t> stream) : stream_(stream) {
  if (stream_.size() < 5) throw CorruptionError("range stream shorter than its preamble");
  for (int k = 0; k < 5; ++k) code_ = (code_ << 8) | next_byte();
}

std::uint8_t RangeDecoder::next_byte() {
  if (pos_ >= stream_.size()) throw CorruptionError("range decoder read past end of stream");
  return stream_[pos_++];
}

int RangeDecoder::decode(const CdfTable& table) {
  if (code_ >= range_) throw CorruptionError("range decoder state out of bounds");
  const std::uint32_t r = range_ >> kCdfPrecisionBits;
  const std::uint32_t value = std::min(code_ / r, kCdfTotal - 1);
  const int s = table.find(value);
  const bool last = s == table.size() - 1;
  code_ -= r * table.low(s);
  range_ = last ? range_ - r * table.low(s) : r * table.mass(s);
  while (range_ < kTop) {
    code_ = (code_ << 8) | next_byte();
    range_ <<= 8;
  }
  return s;
}

}  // namespace srcodec
