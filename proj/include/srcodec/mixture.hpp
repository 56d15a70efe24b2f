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
#include <optional>
#include <random>
#include <span>

namespace srcodec {

inline constexpr int kMixtures = 10;
inline constexpr int kParamGroups = 12;
inline constexpr int kParamsPerPixel = kMixtures * kParamGroups;  // 120
inline constexpr double kMinScale = 1e-3;                         // normalized domain
inline constexpr int kValues = 256;

// Parameter groups of one pixel's mixture; value index = group * mixtures + k.
enum ParamGroup : int {
  kLogitR = 0, kLogitG = 1, kLogitB = 2,
  kMeanR = 3, kMeanG = 4, kMeanB = 5,
  kLogScaleR = 6, kLogScaleG = 7, kLogScaleB = 8,
  kCoeffGR = 9, kCoeffBR = 10, kCoeffBG = 11,
};

// Raw (pre-activation) mixture parameters of one pixel, as produced by the
// network head. Means and log-scales live in the [-1, 1] value domain
// (x / 127.5 - 1); weights are softmax(logits) per channel; scales are
// exp(log-scale) floored at kMinScale; coefficients are tanh(raw).
struct MixtureParams {
  int mixtures = kMixtures;
  std::array<double, kParamsPerPixel> raw{};

  double& at(int group, int k) { return raw[group * mixtures + k]; }
  double at(int group, int k) const { return raw[group * mixtures + k]; }
};

struct TruncRange {
  int lo = 0;
  int hi = 255;

  int size() const { return hi - lo + 1; }
  bool full() const { return lo == 0 && hi == 255; }
  friend bool operator==(const TruncRange&, const TruncRange&) = default;
};

using Pmf = std::array<double, kValues>;

// Probability of value x under a logistic with mean mu and scale s (pixel
// units), integrated over [x - 0.5, x + 0.5]; the bins at 0 and 255 absorb
// the tails.
double bin_prob(double mu, double s, int x);

// Distribution of one channel given the already decoded channels of the same
// pixel (prev[0] = R for G; prev[0] = R, prev[1] = G for B). When `range` is
// given the pmf is only evaluated inside it and is zero elsewhere (not
// renormalized).
void channel_pmf(const MixtureParams& params, int channel, std::span<const std::uint8_t> prev,
                 Pmf& out, std::optional<TruncRange> range = std::nullopt);

// Admissible values for the next coded pixel of a block with p real pixels
// whose average is avgQ/4, given the block pixels decoded so far. At least two
// pixels must remain. Throws CorruptionError on an empty range.
TruncRange valid_range(int avg_quarters, int count, std::span<const std::uint8_t> decoded);

// Zeroes the pmf outside `range` and renormalizes; falls back to uniform over
// the range when the in-range mass underflows.
void truncate(Pmf& pmf, TruncRange range);

using PixelTargets = std::array<std::uint8_t, 3>;
using PixelRanges = std::array<TruncRange, 3>;

// -log2 P(target) summed over the three channels, each channel conditioned on
// the true values of its predecessors. Optional ranges renormalize each
// channel's mixture over its admissible interval.
double nll(const MixtureParams& params, const PixelTargets& target,
           const PixelRanges* ranges = nullptr);

// nll and its exact derivative with respect to every raw parameter.
double nll_grad(const MixtureParams& params, const PixelTargets& target,
                const PixelRanges* ranges, std::array<double, kParamsPerPixel>& grad);

// Uniform double in [0, 1) from 53 generator bits; identical on every platform.
inline double canonical(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Inverse-CDF draw from a pmf restricted to `range`.
int sample_pmf(const Pmf& pmf, TruncRange range, std::mt19937_64& rng);

int sample(const MixtureParams& params, int channel, std::span<const std::uint8_t> prev,
           std::optional<TruncRange> range, std::mt19937_64& rng);

}  // namespace srcodec
