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

#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "srcodec/errors.hpp"
#include "srcodec/network.hpp"
#include "srcodec/trainer.hpp"

using namespace srcodec;

namespace {

const ModelConfig kSmall{3, 6, 1, true};

double two_pass_bits(const Network<double>& net, const Pyramid& pyr) {
  const int levels = net.config().levels;
  double bits = 0.0;
  std::optional<Tensor<double>> cross;
  for (int l = levels - 1; l >= 0; --l) {
    const AveragePlane& avg = pyr.averages[l];
    const Image& hi = pyr.levels[l];
    LevelEvaluator<double> ev(net, l, avg, cross);
    for (int pos = 0; pos < kCodedPositions; ++pos) {
      const Tensor<double>& head = ev.params_for(pos, hi);
      for (int i = 0; i < avg.height; ++i)
        for (int j = 0; j < avg.width; ++j) {
          if (!block_geometry(avg.width, avg.height, hi.width, hi.height, i, j).coded(pos)) continue;
          const int x = 2 * j + kBlockOffsets[pos][1], y = 2 * i + kBlockOffsets[pos][0];
          bits += nll(params_at(head, pos, i, j), {hi.at(x, y, 0), hi.at(x, y, 1), hi.at(x, y, 2)});
        }
    }
    if (l > 0) cross = ev.cross_features(pyr.averages[l - 1].height, pyr.averages[l - 1].width);
  }
  return bits;
}

}  // namespace

TEST_CASE("weight file round trip") {
  const WeightStore w = init_weights(kSmall, 3);
  const auto bytes = w.serialize();
  CHECK(std::string(bytes.begin(), bytes.begin() + 6) == "SRECW1");
  const WeightStore back = WeightStore::parse(bytes);
  CHECK(back == w);
  CHECK(back.hash() == w.hash());
  std::uint64_t tail = 0;
  for (int k = 0; k < 8; ++k) tail |= static_cast<std::uint64_t>(bytes[bytes.size() - 8 + k]) << (8 * k);
  CHECK(tail == w.hash());
}

TEST_CASE("weight file errors") {
  const auto bytes = init_weights(kSmall, 3).serialize();
  for (std::size_t cut : {std::size_t{0}, std::size_t{5}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
    const std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + cut);
    CHECK_THROWS_AS(WeightStore::parse(part), FormatError);
  }
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(WeightStore::parse(bad), FormatError);
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 1;
  CHECK_THROWS_AS(WeightStore::parse(flipped), FormatError);
}

TEST_CASE("hash changes with any tensor") {
  WeightStore w = init_weights(kSmall, 3);
  const auto h0 = w.hash();
  w.tensors.back().values[0] += 1e-3f;
  CHECK(w.hash() != h0);
  CHECK(init_weights(kSmall, 4).hash() != h0);
  CHECK(init_weights(kSmall, 3).hash() == h0);
}

TEST_CASE("architecture is recovered from the weights") {
  for (const ModelConfig cfg : {ModelConfig{3, 6, 1, true}, ModelConfig{2, 4, 2, false},
                                ModelConfig{1, 8, 0, true}}) {
    CHECK(infer_config(init_weights(cfg, 1)) == cfg);
  }
  WeightStore w = init_weights(kSmall, 1);
  w.tensors[0].shape[0] += 1;
  CHECK_THROWS(infer_config(w));
}

TEST_CASE("initialization bounds") {
  const WeightStore w = init_weights(kSmall, 5);
  for (const auto& spec : parameter_layout(kSmall)) {
    const auto* e = w.find(spec.name);
    REQUIRE(e != nullptr);
    const float bound = 1.0f / std::sqrt(static_cast<float>(spec.fan_in));
    for (float v : e->values) {
      if (spec.bias) REQUIRE(v == 0.0f);
      else REQUIRE(std::abs(v) <= bound);
    }
  }
}

TEST_CASE("head planes match each level's grid") {
  std::mt19937_64 rng(1);
  for (bool fact : {true, false}) {
    const Network<float> net(init_weights(ModelConfig{3, 4, 1, fact}, 2));
    const Pyramid pyr = build_pyramid(srtest::random_image(23, 14, rng), 3);
    for (int l = 0; l < 3; ++l) {
      const auto out = forward_step<float>(net, l, 0, pyr.averages[l], pyr.levels[l], nullptr, nullptr);
      CHECK(out.head.channels == (fact ? 120 : 360));
      CHECK(out.head.height == pyr.averages[l].height);
      CHECK(out.head.width == pyr.averages[l].width);
      CHECK(out.trunk.channels == 4);
    }
  }
}

TEST_CASE("teacher-forced loss equals the per-pass decode computation") {
  std::mt19937_64 rng(2);
  for (bool fact : {true, false}) {
    const Network<double> net(init_weights(ModelConfig{3, 6, 1, fact}, 9));
    for (auto [w, h] : {std::pair{16, 16}, {13, 9}, {1, 1}, {64, 64}}) {
      const Pyramid pyr = build_pyramid(srtest::random_image(w, h, rng), 3);
      const double single = image_nll(net, pyr, false).bits;
      const double passes = two_pass_bits(net, pyr);
      CHECK(single == doctest::Approx(passes).epsilon(1e-9));
    }
  }
  const Network<float> fnet(init_weights(kSmall, 9));
  const Network<double> dnet(init_weights(kSmall, 9));
  const Pyramid pyr = build_pyramid(srtest::natural("coffee"), 3);
  CHECK(image_nll(fnet, pyr, false).bits == doctest::Approx(two_pass_bits(dnet, pyr)).epsilon(1e-5));
}

TEST_CASE("receptive field locality at the coarsest level") {
  // Radius: two 3x3 convs per residual block, then dilations 1, 2 and 4.
  const ModelConfig cfg{3, 4, 1, true};
  const int radius = 2 * cfg.res_blocks + 1 + 2 + 4;
  const Network<double> net(init_weights(cfg, 4));
  AveragePlane avg{24, 1, std::vector<std::int32_t>(24 * 3, 400)};
  const Image hi(48, 2, 100);
  const auto base = forward_step<double>(net, 2, 0, avg, hi, nullptr, nullptr).head;
  auto changed = [&](int dist) {
    AveragePlane a = avg;
    a.at(dist, 0, 1) = 800;
    const auto head = forward_step<double>(net, 2, 0, a, hi, nullptr, nullptr).head;
    for (int k = 0; k < head.channels; ++k)
      if (head.at(k, 0, 0) != base.at(k, 0, 0)) return true;
    return false;
  };
  CHECK_FALSE(changed(radius + 1));
  CHECK_FALSE(changed(radius + 5));
  CHECK(changed(radius));
  CHECK(changed(1));
}

TEST_CASE("forward pass is deterministic") {
  std::mt19937_64 rng(3);
  const Network<float> net(init_weights(kSmall, 4));
  const Pyramid pyr = build_pyramid(srtest::random_image(20, 20, rng), 3);
  CHECK(image_nll(net, pyr, false).bits == image_nll(net, pyr, false).bits);
}

TEST_CASE("finest level upsampling has no influence") {
  std::mt19937_64 rng(4);
  const Network<double> net(init_weights(kSmall, 4));
  std::vector<Tensor<double>> grads;
  for (const auto& p : net.params()) grads.emplace_back(p.channels, p.height, p.width);
  image_nll(net, build_pyramid(srtest::random_image(12, 12, rng), 3), false, &grads, 1.0);
  const auto& g = grads[net.index("l0.up.w")];
  CHECK(std::all_of(g.data.begin(), g.data.end(), [](double v) { return v == 0.0; }));
  const auto& g1 = grads[net.index("l1.up.w")];
  CHECK(std::any_of(g1.data.begin(), g1.data.end(), [](double v) { return v != 0.0; }));
}
