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

#include "srcodec/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "srcodec/errors.hpp"

namespace srcodec::ops {

namespace {

template <typename Real>
using RowMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Real>
using MapMatrix = Eigen::Map<RowMatrix<Real>>;
template <typename Real>
using ConstMapMatrix = Eigen::Map<const RowMatrix<Real>>;

template <typename Real>
int ksize(const Tensor<Real>& weight) {
  const int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(weight.width))));
  if (k * k != weight.width || (k != 1 && k != 3))
    throw ConfigError("unsupported convolution kernel");
  return k;
}

// Unfolds the (C, H, W) input into a (C*k*k, H*W) matrix of shifted copies.
template <typename Real>
void im2col(const Tensor<Real>& in, int k, int dilation, std::vector<Real>& col) {
  const int h = in.height, w = in.width;
  const std::size_t hw = in.plane();
  col.assign(static_cast<std::size_t>(in.channels) * k * k * hw, Real(0));
  const int pad = dilation * (k / 2);
  for (int c = 0; c < in.channels; ++c) {
    const Real* src = in.data.data() + c * hw;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        Real* dst = col.data() + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * hw;
        const int dy = ky * dilation - pad;
        const int dx = kx * dilation - pad;
        const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
        if (x0 >= x1) continue;
        for (int y = 0; y < h; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          std::copy(src + static_cast<std::size_t>(sy) * w + x0 + dx,
                    src + static_cast<std::size_t>(sy) * w + x1 + dx,
                    dst + static_cast<std::size_t>(y) * w + x0);
        }
      }
    }
  }
}

template <typename Real>
void col2im(const std::vector<Real>& col, int k, int dilation, Tensor<Real>& d_in) {
  const int h = d_in.height, w = d_in.width;
  const std::size_t hw = d_in.plane();
  const int pad = dilation * (k / 2);
  for (int c = 0; c < d_in.channels; ++c) {
    Real* dst = d_in.data.data() + c * hw;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const Real* src = col.data() + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * hw;
        const int dy = ky * dilation - pad;
        const int dx = kx * dilation - pad;
        const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
        if (x0 >= x1) continue;
        for (int y = 0; y < h; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          Real* row = dst + static_cast<std::size_t>(sy) * w + dx;
          const Real* srow = src + static_cast<std::size_t>(y) * w;
          for (int x = x0; x < x1; ++x) row[x] += srow[x];
        }
      }
    }
  }
}

}  // namespace

int kernel_size(const Tensor<float>& weight) { return ksize(weight); }
int kernel_size(const Tensor<double>& weight) { return ksize(weight); }

template <typename Real>
void conv2d(const Tensor<Real>& in, const Tensor<Real>& weight, const Tensor<Real>& bias,
            int dilation, Tensor<Real>& out) {
  const int k = ksize(weight);
  if (weight.height != in.channels)
    throw ConfigError("conv2d: weight expects " + std::to_string(weight.height) +
                      " input channels, got " + std::to_string(in.channels));
  if (bias.channels != weight.channels) throw ConfigError("conv2d: bias size mismatch");
  const int out_c = weight.channels;
  const auto hw = static_cast<Eigen::Index>(in.plane());
  out = Tensor<Real>(out_c, in.height, in.width);
  MapMatrix<Real> o(out.data.data(), out_c, hw);
  ConstMapMatrix<Real> wm(weight.data.data(), out_c, static_cast<Eigen::Index>(in.channels) * k * k);
  if (k == 1) {
    ConstMapMatrix<Real> x(in.data.data(), in.channels, hw);
    o.noalias() = wm * x;
  } else {
    thread_local std::vector<Real> col;
    im2col(in, k, dilation, col);
    ConstMapMatrix<Real> x(col.data(), static_cast<Eigen::Index>(in.channels) * k * k, hw);
    o.noalias() = wm * x;
  }
  for (int c = 0; c < out_c; ++c) o.row(c).array() += bias.data[c];
}

template <typename Real>
void conv2d_backward(const Tensor<Real>& in, const Tensor<Real>& weight, int dilation,
                     const Tensor<Real>& d_out, Tensor<Real>* d_in, Tensor<Real>* d_weight,
                     Tensor<Real>* d_bias) {
  const int k = ksize(weight);
  const int out_c = weight.channels;
  const auto hw = static_cast<Eigen::Index>(in.plane());
  const auto rows = static_cast<Eigen::Index>(in.channels) * k * k;
  ConstMapMatrix<Real> go(d_out.data.data(), out_c, hw);
  ConstMapMatrix<Real> wm(weight.data.data(), out_c, rows);

  if (d_bias != nullptr) {
    for (int c = 0; c < out_c; ++c) d_bias->data[c] += go.row(c).sum();
  }
  if (k == 1) {
    ConstMapMatrix<Real> x(in.data.data(), in.channels, hw);
    if (d_weight != nullptr) {
      MapMatrix<Real> gw(d_weight->data.data(), out_c, rows);
      gw.noalias() += go * x.transpose();
    }
    if (d_in != nullptr) {
      MapMatrix<Real> gi(d_in->data.data(), in.channels, hw);
      gi.noalias() += wm.transpose() * go;
    }
    return;
  }
  thread_local std::vector<Real> col;
  if (d_weight != nullptr) {
    im2col(in, k, dilation, col);
    ConstMapMatrix<Real> x(col.data(), rows, hw);
    MapMatrix<Real> gw(d_weight->data.data(), out_c, rows);
    gw.noalias() += go * x.transpose();
  }
  if (d_in != nullptr) {
    col.assign(static_cast<std::size_t>(rows * hw), Real(0));
    MapMatrix<Real> gc(col.data(), rows, hw);
    gc.noalias() = wm.transpose() * go;
    col2im(col, k, dilation, *d_in);
  }
}

template <typename Real>
void leaky_relu(const Tensor<Real>& in, Real slope, Tensor<Real>& out) {
  out = in;
  for (auto& v : out.data)
    if (v < Real(0)) v *= slope;
}

template <typename Real>
void leaky_relu_backward(const Tensor<Real>& in, Real slope, const Tensor<Real>& d_out,
                         Tensor<Real>& d_in) {
  for (std::size_t i = 0; i < in.data.size(); ++i)
    d_in.data[i] += in.data[i] < Real(0) ? slope * d_out.data[i] : d_out.data[i];
}

template <typename Real>
void pixel_shuffle(const Tensor<Real>& in, Tensor<Real>& out) {
  if (in.channels % 4 != 0) throw ConfigError("pixel_shuffle: channels not divisible by 4");
  const int c = in.channels / 4;
  out = Tensor<Real>(c, in.height * 2, in.width * 2);
  for (int ch = 0; ch < c; ++ch)
    for (int g = 0; g < 4; ++g)
      for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x)
          out.at(ch, 2 * y + g / 2, 2 * x + g % 2) = in.at(4 * ch + g, y, x);
}

template <typename Real>
void pixel_unshuffle(const Tensor<Real>& in, Tensor<Real>& out) {
  if (in.height % 2 != 0 || in.width % 2 != 0)
    throw ConfigError("pixel_unshuffle: odd spatial size");
  out = Tensor<Real>(in.channels * 4, in.height / 2, in.width / 2);
  for (int ch = 0; ch < in.channels; ++ch)
    for (int g = 0; g < 4; ++g)
      for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
          out.at(4 * ch + g, y, x) = in.at(ch, 2 * y + g / 2, 2 * x + g % 2);
}

#define SRCODEC_INSTANTIATE(Real)                                                           \
  template void conv2d<Real>(const Tensor<Real>&, const Tensor<Real>&, const Tensor<Real>&, \
                             int, Tensor<Real>&);                                           \
  template void conv2d_backward<Real>(const Tensor<Real>&, const Tensor<Real>&, int,        \
                                      const Tensor<Real>&, Tensor<Real>*, Tensor<Real>*,    \
                                      Tensor<Real>*);                                       \
  template void leaky_relu<Real>(const Tensor<Real>&, Real, Tensor<Real>&);                 \
  template void leaky_relu_backward<Real>(const Tensor<Real>&, Real, const Tensor<Real>&,   \
                                          Tensor<Real>&);                                   \
  template void pixel_shuffle<Real>(const Tensor<Real>&, Tensor<Real>&);                    \
  template void pixel_unshuffle<Real>(const Tensor<Real>&, Tensor<Real>&);

SRCODEC_INSTANTIATE(float)
SRCODEC_INSTANTIATE(double)

#undef SRCODEC_INSTANTIATE

}  // namespace srcodec::ops
