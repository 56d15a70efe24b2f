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

#include "srcodec/predictor.hpp"

#include <algorithm>
#include <string>

#include "srcodec/errors.hpp"

namespace srcodec {

const char* predictor_name(PredictorKind kind) {
  switch (kind) {
    case PredictorKind::kUniform: return "uniform";
    case PredictorKind::kHeuristic: return "heuristic";
    case PredictorKind::kCnn: return "cnn";
  }
  return "?";
}

PredictorKind parse_predictor(const std::string& name) {
  if (name == "uniform") return PredictorKind::kUniform;
  if (name == "heuristic") return PredictorKind::kHeuristic;
  if (name == "cnn") return PredictorKind::kCnn;
  throw ConfigError("unknown predictor '" + name + "'");
}

void UniformPredictor::pmf(int, int, int, std::span<const std::uint8_t>, Pmf& out,
                           std::optional<TruncRange> range) const {
  const TruncRange r = range.value_or(TruncRange{});
  out.fill(0.0);
  for (int x = r.lo; x <= r.hi; ++x) out[x] = 1.0 / r.size();
}

double HeuristicPredictor::expected(int i, int j, int c) const {
  const BlockGeometry g = block_geometry(avg_->width, avg_->height, hi_width_, hi_height_, i, j);
  double rest = g.count * avg_->at(j, i, c) / 4.0;
  int left = g.count;
  for (int q = 0; q < pos_; ++q) {
    if (!g.present[q]) continue;
    rest -= hi_->at(2 * j + kBlockOffsets[q][1], 2 * i + kBlockOffsets[q][0], c);
    --left;
  }
  return rest / std::max(left, 1);
}

void HeuristicPredictor::pmf(int i, int j, int c, std::span<const std::uint8_t> prev, Pmf& out,
                             std::optional<TruncRange> range) const {
  double mu = expected(i, j, c);
  if (c > 0) mu += prev[c - 1] - expected(i, j, c - 1);
  mu = std::clamp(mu, 0.0, 255.0);
  const TruncRange r = range.value_or(TruncRange{});
  out.fill(0.0);
  for (int x = r.lo; x <= r.hi; ++x) out[x] = bin_prob(mu, kScale, x);
}

CnnPredictor::CnnPredictor(const WeightStore& weights) : net_(weights) {}

void CnnPredictor::begin_level(int level, const AveragePlane& avg, int hi_width, int hi_height) {
  Predictor::begin_level(level, avg, hi_width, hi_height);
  std::optional<Tensor<float>> cross;
  if (eval_ && level < net_.config().levels - 1)
    cross = eval_->cross_features(avg.height, avg.width);
  eval_.reset();
  eval_.emplace(net_, level, avg, std::move(cross));
  head_ = nullptr;
}

void CnnPredictor::begin_pass(int pos, const Image& hi) {
  Predictor::begin_pass(pos, hi);
  head_ = &eval_->params_for(pos, hi);
}

void CnnPredictor::pmf(int i, int j, int c, std::span<const std::uint8_t> prev, Pmf& out,
                       std::optional<TruncRange> range) const {
  channel_pmf(params_at(*head_, pos_, i, j), c, prev, out, range);
}

std::unique_ptr<Predictor> make_predictor(PredictorKind kind, const WeightStore* weights) {
  switch (kind) {
    case PredictorKind::kUniform: return std::make_unique<UniformPredictor>();
    case PredictorKind::kHeuristic: return std::make_unique<HeuristicPredictor>();
    case PredictorKind::kCnn:
      if (weights == nullptr) throw ConfigError("the cnn predictor needs a weight file");
      return std::make_unique<CnnPredictor>(*weights);
  }
  throw ConfigError("unknown predictor kind");
}

}  // namespace srcodec
