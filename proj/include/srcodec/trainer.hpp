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
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "srcodec/image.hpp"
#include "srcodec/network.hpp"
#include "srcodec/pyramid.hpp"

namespace srcodec {

struct LossBreakdown {
  double bits = 0.0;                // model NLL over every coded subpixel
  std::vector<double> level_bits;   // index l holds -log2 P(x^(l) | y^(l+1))
  double subpixels = 0.0;           // 3 * W * H of the full-resolution image
  double bpsp() const { return bits / subpixels; }
};

// Teacher-forced negative log-likelihood of every level of `pyr` (which must
// have as many levels as the model). When grads is non-null the derivative of
// bits * grad_scale is accumulated into it.
template <typename Real>
LossBreakdown image_nll(const Network<Real>& net, const Pyramid& pyr, bool constraints,
                        std::vector<Tensor<Real>>* grads = nullptr, Real grad_scale = Real(1),
                        std::uint64_t* kink_signature = nullptr);

// Bits of the raw coarsest image plus the 2-bit rounding residuals of every
// level; independent of the model.
double overhead_bits(const Image& image, int levels);

// Mean bits per subpixel over a set of images: model NLL plus overhead.
struct EvalResult {
  double nll_bpsp = 0.0;
  double total_bpsp = 0.0;
};
EvalResult evaluate(const Network<float>& net, const std::vector<Image>& images, bool constraints);

struct GradCheckOptions {
  double step = 1e-4;
  int samples_per_tensor = 8;
  std::uint64_t seed = 7;
  bool constraints = false;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  int checked = 0;
  int skipped_kinks = 0;  // entries whose +-h evaluations straddle a ReLU kink
};

// Relative error used throughout: |a - n| / max(|a|, |n|, 1e-6).
double relative_error(double analytic, double numeric);

// Central differences of the loss in bits per subpixel against the analytic
// gradient for a random subset of every tensor, evaluated in double.
GradCheckReport grad_check(const Network<double>& net, const Image& tile,
                           const GradCheckOptions& opts = {});

struct TrainConfig {
  ModelConfig model;
  bool constraints = false;
  int batch_size = 32;
  double lr = 1e-4;
  double clip = 0.5;
  double decay = 0.75;
  int decay_every = 1;  // epochs
  int epochs = 10;
  int crop = 64;
  bool flip = true;
  std::uint64_t seed = 1;
  int threads = 1;
  std::optional<int> max_steps;
  std::string init_weights;  // optional warm start
  std::string checkpoint;    // written after every epoch when non-empty
  std::string log;           // metrics log path when non-empty

  // Learning rate in effect during `epoch` (0-based).
  double lr_at(int epoch) const;
};

// key=value lines; '#' starts a comment. `preset=imagenet64|openimages|desk`
// applies a block of defaults before the keys that follow it.
TrainConfig parse_train_config(const std::string& text);
TrainConfig load_train_config(const std::filesystem::path& path);

struct AdamState {
  std::vector<Tensor<float>> m;
  std::vector<Tensor<float>> v;
  long step = 0;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

// Scales grads so their global L2 norm is at most max_norm; returns the norm
// before clipping.
double clip_global_norm(std::vector<Tensor<float>>& grads, double max_norm);
void adam_update(std::vector<Tensor<float>>& params, const std::vector<Tensor<float>>& grads,
                 AdamState& state, double lr);

struct TrainProgress {
  long step = 0;
  int epoch = 0;
  double loss_bpsp = 0.0;
  double lr = 0.0;
  double grad_norm = 0.0;
};

// `count` fixed tiles of size x size taken at seeded random positions, cycling
// through the source images; sources smaller than `size` are used whole.
std::vector<Image> cut_tiles(const std::vector<Image>& sources, int count, int size,
                             std::uint64_t seed);

// Throws ConfigError on an empty corpus or a non-finite loss/gradient.
WeightStore train(const std::vector<Image>& corpus, const TrainConfig& config,
                  const std::function<void(const TrainProgress&)>& on_step = {},
                  std::ostream* log = nullptr);

}  // namespace srcodec
