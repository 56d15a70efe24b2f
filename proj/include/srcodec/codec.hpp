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
#include <string>
#include <vector>

#include "srcodec/image.hpp"
#include "srcodec/network.hpp"
#include "srcodec/predictor.hpp"

namespace srcodec {

inline constexpr char kContainerMagic[5] = {'S', 'R', 'E', 'C', '1'};
inline constexpr std::uint8_t kContainerVersion = 1;
inline constexpr std::size_t kHeaderBytes = 24;

enum class ConstraintMode { kOff, kOn, kAuto };

ConstraintMode parse_constraints(const std::string& value);

struct Container {
  int width = 0;
  int height = 0;
  int levels = 3;
  std::uint64_t model_id = 0;
  bool constraints = false;
  PredictorKind predictor = PredictorKind::kUniform;
  std::vector<std::uint8_t> base;                    // x^(L), row-major RGB
  std::vector<std::vector<std::uint8_t>> residuals;  // r^(L) .. r^(1)
  std::vector<std::vector<std::uint8_t>> streams;    // level L-1 .. 0
  std::uint32_t checksum = 0;                        // CRC-32 of the RGB bytes

  std::vector<std::uint8_t> serialize() const;
  // Throws FormatError for anything that is not a well-formed container.
  static Container parse(std::span<const std::uint8_t> bytes);
};

struct CodecOptions {
  int levels = 3;
  ConstraintMode constraints = ConstraintMode::kAuto;
  int threads = 1;
};

std::vector<std::uint8_t> compress(const Image& image, Predictor& predictor,
                                   const CodecOptions& opts = {});

// Errors: FormatError (malformed container), HashMismatchError (model id
// differs from the predictor's), CorruptionError (stream or checksum failure).
Image decompress(std::span<const std::uint8_t> bytes, Predictor& predictor, int threads = 1);

// Builds the predictor the container asks for; `weights` may be null unless
// the container was written with the cnn predictor.
Image decompress(std::span<const std::uint8_t> bytes, const WeightStore* weights,
                 int threads = 1);

// Residual codes are counted at 2 bits each; their byte padding is part of
// the container row, so the rows sum to the file size in bits.
struct StatsRow {
  std::string name;
  std::size_t bits = 0;
  double bpsp = 0.0;
};

struct StatsReport {
  int width = 0;
  int height = 0;
  std::vector<StatsRow> rows;  // every section of the file, in file order groups
  std::size_t total_bytes = 0;
  double total_bpsp = 0.0;

  const StatsRow& row(const std::string& name) const;
  std::string format() const;
};

StatsReport stats(std::span<const std::uint8_t> bytes);

// Super-resolves `low` by `levels` factors of two, sampling each coded pixel
// from the predictor. The residuals of the implied pyramid are all zero, so
// with constraints the result average-pools back to `low` exactly.
Image sample(const Image& low, Predictor& predictor, int levels, std::uint64_t seed,
             bool constraints);

}  // namespace srcodec
