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

#include <cstddef>
#include <vector>

namespace srcodec {

// Dense (channels, height, width) tensor, row-major within each channel.
template <typename Real>
struct Tensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<Real> data;

  Tensor() = default;
  Tensor(int c, int h, int w, Real fill = Real(0))
      : channels(c), height(h), width(w),
        data(static_cast<std::size_t>(c) * h * w, fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  bool same_shape(const Tensor& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }

  Real& at(int c, int y, int x) { return data[(c * plane()) + static_cast<std::size_t>(y) * width + x]; }
  Real at(int c, int y, int x) const {
    return data[(c * plane()) + static_cast<std::size_t>(y) * width + x];
  }
};

template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& t) {
  Tensor<To> out;
  out.channels = t.channels;
  out.height = t.height;
  out.width = t.width;
  out.data.assign(t.data.begin(), t.data.end());
  return out;
}

}  // namespace srcodec
