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
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "srcodec/autodiff.hpp"
#include "srcodec/image.hpp"
#include "srcodec/mixture.hpp"
#include "srcodec/pyramid.hpp"
#include "srcodec/tensor.hpp"

namespace srcodec {

inline constexpr float kLeakySlope = 0.2f;
inline constexpr int kCodedPositions = 3;  // TL, TR, BL; BR is reconstructed

struct ModelConfig {
  int levels = 3;
  int width = 64;
  int res_blocks = 3;
  // Factorized: three autoregressive passes per level (TL | y, TR | y, TL,
  // BL | y, TL, TR). Otherwise one pass predicts all three positions from y.
  bool factorized = true;

  int steps() const { return factorized ? kCodedPositions : 1; }
  int head_channels() const { return factorized ? kParamsPerPixel : kCodedPositions * kParamsPerPixel; }
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Named float tensors as stored on disk. File layout, all integers 32-bit
// little-endian: "SRECW1", tensor count, then per tensor name length, name
// bytes, rank, dims, raw float32 values; finally a 64-bit FNV-1a hash of all
// preceding bytes.
struct WeightStore {
  struct Entry {
    std::string name;
    std::vector<int> shape;
    std::vector<float> values;
    friend bool operator==(const Entry&, const Entry&) = default;
  };
  std::vector<Entry> tensors;

  const Entry* find(const std::string& name) const;
  // Equals the trailing hash of the serialized file.
  std::uint64_t hash() const;
  std::vector<std::uint8_t> serialize() const;
  // Throws FormatError on bad magic, truncation, hash mismatch or bad sizes.
  static WeightStore parse(std::span<const std::uint8_t> bytes);

  friend bool operator==(const WeightStore&, const WeightStore&) = default;
};

WeightStore load_weights(const std::filesystem::path& path);
void save_weights(const WeightStore& store, const std::filesystem::path& path);

struct ParamSpec {
  std::string name;
  std::vector<int> shape;  // (out, in, k, k) for kernels, (out) for biases
  int fan_in = 0;
  bool bias = false;
};

std::vector<ParamSpec> parameter_layout(const ModelConfig& config);
// Recovers the architecture from tensor names and validates every shape.
ModelConfig infer_config(const WeightStore& store);
// Kernels uniform in +-1/sqrt(fan_in), biases zero.
WeightStore init_weights(const ModelConfig& config, std::uint64_t seed);

// Network input of pass `step` on the low-resolution grid: the block average
// y and, for later passes, the already known top-left / top-right pixels, all
// mapped to [-1, 1]. A missing top-right pixel repeats the top-left one.
template <typename Real>
Tensor<Real> step_input(const AveragePlane& avg, const Image& hi, int step);

template <typename Real>
class Network {
 public:
  using Var = typename GradTape<Real>::Var;

  explicit Network(const WeightStore& store);

  const ModelConfig& config() const { return config_; }
  std::uint64_t model_id() const { return model_id_; }
  const std::vector<Tensor<Real>>& params() const { return params_; }
  std::vector<Tensor<Real>>& params() { return params_; }
  const std::vector<std::string>& names() const { return names_; }
  int index(const std::string& name) const;
  // Builds a store from the current parameters (rounded to float).
  WeightStore to_store() const;

  // Places every parameter on the tape; gradients (if given) must be shaped
  // like params().
  std::vector<Var> bind(GradTape<Real>& tape, std::vector<Tensor<Real>>* grads) const;

  struct StepVars {
    Var head;
    Var trunk;
  };
  StepVars step(GradTape<Real>& tape, std::span<const Var> bound, int level, int step,
                Var input, std::optional<Var> feat_prev, std::optional<Var> feat_cross) const;
  // Sub-pixel upsampling of a level's final trunk to the next finer grid.
  Var upsample(GradTape<Real>& tape, std::span<const Var> bound, int level, Var trunk,
               int out_height, int out_width) const;

 private:
  Var conv(GradTape<Real>& tape, std::span<const Var> bound, const std::string& prefix, Var x,
           int dilation) const;

  ModelConfig config_;
  std::uint64_t model_id_ = 0;
  std::vector<Tensor<Real>> params_;
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> index_;
};

template <typename Real>
struct StepOutput {
  Tensor<Real> head;   // head_channels x h x w mixture parameters
  Tensor<Real> trunk;  // features passed to the next pass
};

// One network pass without gradient recording.
template <typename Real>
StepOutput<Real> forward_step(const Network<Real>& net, int level, int step,
                              const AveragePlane& avg, const Image& hi,
                              const Tensor<Real>* feat_prev, const Tensor<Real>* feat_cross);

template <typename Real>
Tensor<Real> upsample_features(const Network<Real>& net, int level, const Tensor<Real>& trunk,
                               int out_height, int out_width);

// Mixture parameters of block (y, x) for coded position `pos` from a head
// output. Non-factorized heads carry all three positions.
template <typename Real>
MixtureParams params_at(const Tensor<Real>& head, int pos, int y, int x);

// Runs the passes of one level in decode order; the caller fills `hi` between
// passes.
template <typename Real>
class LevelEvaluator {
 public:
  LevelEvaluator(const Network<Real>& net, int level, const AveragePlane& avg,
                 std::optional<Tensor<Real>> cross);

  // Head output that holds the parameters of position `pos`. Must be called
  // with pos = 0, 1, 2 in order; hi must contain the true values of earlier
  // positions.
  const Tensor<Real>& params_for(int pos, const Image& hi);
  // Available once every pass ran.
  Tensor<Real> cross_features(int fine_height, int fine_width) const;

 private:
  const Network<Real>& net_;
  int level_;
  AveragePlane avg_;
  std::optional<Tensor<Real>> cross_;
  Tensor<Real> head_;
  Tensor<Real> trunk_;
  int passes_done_ = 0;
};

extern template class Network<float>;
extern template class Network<double>;
extern template class LevelEvaluator<float>;
extern template class LevelEvaluator<double>;

}  // namespace srcodec
