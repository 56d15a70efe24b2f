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
#include <memory>
#include <optional>
#include <span>

#include "srcodec/image.hpp"
#include "srcodec/mixture.hpp"
#include "srcodec/network.hpp"
#include "srcodec/pyramid.hpp"

namespace srcodec {

enum class PredictorKind : std::uint8_t { kUniform = 0, kHeuristic = 1, kCnn = 2 };

const char* predictor_name(PredictorKind kind);
PredictorKind parse_predictor(const std::string& name);

// Source of per-subpixel distributions. The codec drives it level by level
// (coarse to fine) and pass by pass (TL, TR, BL); `hi` holds every pixel of
// the level that the decoder knows at that point.
class Predictor {
 public:
  virtual ~Predictor() = default;

  virtual PredictorKind kind() const = 0;
  virtual std::uint64_t model_id() const { return 0; }
  // Levels the predictor was built for; 0 when any depth works.
  virtual int levels() const { return 0; }
  // Whether range truncation is applied when the caller asks for "auto".
  virtual bool default_constraints() const = 0;

  virtual void begin_level(int level, const AveragePlane& avg, int hi_width, int hi_height) {
    (void)level;
    avg_ = &avg;
    hi_width_ = hi_width;
    hi_height_ = hi_height;
  }
  virtual void begin_pass(int pos, const Image& hi) {
    pos_ = pos;
    hi_ = &hi;
  }

  // Distribution of channel c of the pass's pixel in block (i, j). `prev`
  // holds the channels already known for that pixel. Thread-safe between
  // begin_pass calls.
  virtual void pmf(int i, int j, int c, std::span<const std::uint8_t> prev, Pmf& out,
                   std::optional<TruncRange> range) const = 0;

 protected:
  const AveragePlane* avg_ = nullptr;
  const Image* hi_ = nullptr;
  int hi_width_ = 0;
  int hi_height_ = 0;
  int pos_ = 0;
};

class UniformPredictor final : public Predictor {
 public:
  PredictorKind kind() const override { return PredictorKind::kUniform; }
  bool default_constraints() const override { return false; }
  void pmf(int i, int j, int c, std::span<const std::uint8_t> prev, Pmf& out,
           std::optional<TruncRange> range) const override;
};

// Single logistic centred on the mean the block average leaves for the
// remaining pixels; G and B are shifted by the deviation of the previous
// channel from its own expectation.
class HeuristicPredictor final : public Predictor {
 public:
  static constexpr double kScale = 3.5;

  PredictorKind kind() const override { return PredictorKind::kHeuristic; }
  bool default_constraints() const override { return true; }
  void pmf(int i, int j, int c, std::span<const std::uint8_t> prev, Pmf& out,
           std::optional<TruncRange> range) const override;

  // Expected value of channel c at the pass's pixel, from the block average.
  double expected(int i, int j, int c) const;
};

class CnnPredictor final : public Predictor {
 public:
  explicit CnnPredictor(const WeightStore& weights);

  PredictorKind kind() const override { return PredictorKind::kCnn; }
  std::uint64_t model_id() const override { return net_.model_id(); }
  int levels() const override { return net_.config().levels; }
  bool default_constraints() const override { return !net_.config().factorized; }

  void begin_level(int level, const AveragePlane& avg, int hi_width, int hi_height) override;
  void begin_pass(int pos, const Image& hi) override;
  void pmf(int i, int j, int c, std::span<const std::uint8_t> prev, Pmf& out,
           std::optional<TruncRange> range) const override;

  const Network<float>& network() const { return net_; }

 private:
  Network<float> net_;
  std::optional<LevelEvaluator<float>> eval_;
  const Tensor<float>* head_ = nullptr;
};

// Predictor of the given kind; `weights` is required for kCnn.
std::unique_ptr<Predictor> make_predictor(PredictorKind kind, const WeightStore* weights);

}  // namespace srcodec
