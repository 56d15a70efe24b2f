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

#include "srcodec/tensor.hpp"

// Forward and backward kernels for the layers of the super-resolution
// network. Convolution weights are (out, in, k, k) stored in a Tensor with
// channels = out, height = in, width = k * k; biases are (out, 1, 1).
namespace srcodec::ops {

// Cross-correlation with zero padding dilation * (k / 2), stride 1; k is 1 or
// 3. Throws ConfigError on a channel mismatch.
template <typename Real>
void conv2d(const Tensor<Real>& in, const Tensor<Real>& weight, const Tensor<Real>& bias,
            int dilation, Tensor<Real>& out);

// Accumulates gradients; any of d_in, d_weight, d_bias may be null.
template <typename Real>
void conv2d_backward(const Tensor<Real>& in, const Tensor<Real>& weight, int dilation,
                     const Tensor<Real>& d_out, Tensor<Real>* d_in, Tensor<Real>* d_weight,
                     Tensor<Real>* d_bias);

template <typename Real>
void leaky_relu(const Tensor<Real>& in, Real slope, Tensor<Real>& out);

template <typename Real>
void leaky_relu_backward(const Tensor<Real>& in, Real slope, const Tensor<Real>& d_out,
                         Tensor<Real>& d_in);

// (4c, H, W) -> (c, 2H, 2W); out[ch, 2y + dy, 2x + dx] = in[4 ch + 2 dy + dx, y, x].
template <typename Real>
void pixel_shuffle(const Tensor<Real>& in, Tensor<Real>& out);

// Exact inverse of pixel_shuffle; also its adjoint.
template <typename Real>
void pixel_unshuffle(const Tensor<Real>& in, Tensor<Real>& out);

int kernel_size(const Tensor<float>& weight);
int kernel_size(const Tensor<double>& weight);

}  // namespace srcodec::ops
