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

#include "srcodec/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "srcodec/errors.hpp"
#include "srcodec/ops.hpp"

namespace srcodec {

template <typename Real>
typename GradTape<Real>::Var GradTape<Real>::push(Node node) {
  if (!record_) {
    node.requires_grad = false;
    node.back = nullptr;
  }
  nodes_.push_back(std::move(node));
  return static_cast<Var>(nodes_.size() - 1);
}

template <typename Real>
const Tensor<Real>& GradTape<Real>::value(Var v) const {
  const Node& n = nodes_[v];
  return n.ext != nullptr ? *n.ext : n.own;
}

template <typename Real>
Tensor<Real>& GradTape<Real>::grad_buffer(Var v) {
  Node& n = nodes_[v];
  if (n.grad.size() == 0) {
    const Tensor<Real>& val = value(v);
    n.grad = Tensor<Real>(val.channels, val.height, val.width);
  }
  return n.grad;
}

template <typename Real>
typename GradTape<Real>::Var GradTape<Real>::constant(Tensor<Real> value) {
  Node n;
  n.own = std::move(value);
  return push(std::move(n));
}

template <typename Real>
typename GradTape<Real>::Var GradTape<Real>::parameter(const Tensor<Real>& value,
                                                      Tensor<Real>* grad) {
  Node n;
  n.ext = &value;
  n.ext_grad = grad;
  n.requires_grad = grad != nullptr;
  return push(std::move(n));
}

template <typename Real>
typename GradTape<Real>::Var GradTape<Real>::conv2d(Var x, Var weight, Var bias, int dilation) {
  Node n;
  ops::conv2d(value(x), value(weight), value(bias), dilation, n.own);
  n.requires_grad = needs(x) || needs(weight) || needs(bias);
  n.back = [x, weight, bias, dilation](GradTape& t, Node& self) {
    Tensor<Real>* gx = t.needs(x) ? &t.grad_buffer(x) : nullptr;
    Tensor<Real>* gw = t.needs(weight) ? &t.grad_buffer(weight) : nullptr;
    Tensor<Real>* gb = t.needs(bias) ? &t.grad_buffer(bias) : nullptr;
    ops::conv2d_backward(t.value(x), t.value(weight), dilation, self.grad, gx, gw, gb);
  };
  return push(std::move(n));
}

template <typename Real>
typename GradTape<Real>::Var GradTape<Real>::leaky_relu(Var x, Real slope) {
  Node n;
  const Tensor<Real>& in = value(x);
  ops::leaky_relu(in, slope, n.own);
  for (Real v : in.data) {
    kinks_ ^= v < Real(0) ? 1u : 0u;
    kinks_ *= 1099511628211ull;
  }
  n.requires_grad = needs(x);
  n.back = [x, slope](GradTape& t, Node& self) {
    ops::leaky_relu_backward(t.value(x), slope, self.grad, t.grad_buffer(x));
  };
  return push(std::move(n));
}

template <typename Real>
typename GradTape<Real>::Var GradTape<Real>::add(Var a, Var b) {
  const Tensor<Real>& va = value(a);
  const Tensor<Real>& vb = value(b);
  if (!va.same_shape(vb)) throw ConfigError("add: shape mismatch");
  Node n;
  n.own = va;
  for (std::size_t i = 0; i < n.own.data.size(); ++i) n.own.data[i] += vb.data[i];
  n.requires_grad = needs(a) || needs(b);
  n.back = [a, b](GradTape& t, Node& self) {
    for (Var v : {a, b}) {
      if (!t.needs(v)) continue;
      auto& g = t.grad_buffer(v);
      for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += self.grad.data[i];
    }
  };
  return push(std::move(n));
}

template <typename Real>
typename GradTape<Real>::Var GradTape<Real>::concat(std::span<const Var> parts) {
  if (parts.empty()) throw ConfigError("concat: no inputs");
  const Tensor<Real>& first = value(parts[0]);
  int channels = 0;
  bool req = false;
  for (Var p : parts) {
    const Tensor<Real>& v = value(p);
    if (v.height != first.height || v.width != first.width)
      throw ConfigError("concat: spatial size mismatch");
    channels += v.channels;
    req = req || needs(p);
  }
  Node n;
  n.own = Tensor<Real>(channels, first.height, first.width);
  std::size_t offset = 0;
  for (Var p : parts) {
    const auto& src = value(p).data;
    std::copy(src.begin(), src.end(), n.own.data.begin() + static_cast<std::ptrdiff_t>(offset));
    offset += src.size();
  }
  n.requires_grad = req;
  std::vector<Var> ids(parts.begin(), parts.end());
  n.back = [ids](GradTape& t, Node& self) {
    std::size_t off = 0;
    for (Var p : ids) {
      const std::size_t len = t.value(p).size();
      if (t.needs(p)) {
        auto& g = t.grad_buffer(p);
        for (std::size_t i = 0; i < len; ++i) g.data[i] += self.grad.data[off + i];
      }
      off += len;
    }
  };
  return push(std::move(n));
}

template <typename Real>
typename GradTape<Real>::Var GradTape<Real>::pixel_shuffle(Var x) {
  Node n;
  ops::pixel_shuffle(value(x), n.own);
  n.requires_grad = needs(x);
  n.back = [x](GradTape& t, Node& self) {
    Tensor<Real> back;
    ops::pixel_unshuffle(self.grad, back);
    auto& g = t.grad_buffer(x);
    for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += back.data[i];
  };
  return push(std::move(n));
}

template <typename Real>
typename GradTape<Real>::Var GradTape<Real>::crop(Var x, int height, int width) {
  const Tensor<Real>& in = value(x);
  if (height > in.height || width > in.width) throw ConfigError("crop: window too large");
  Node n;
  n.own = Tensor<Real>(in.channels, height, width);
  for (int c = 0; c < in.channels; ++c)
    for (int y = 0; y < height; ++y)
      for (int xx = 0; xx < width; ++xx) n.own.at(c, y, xx) = in.at(c, y, xx);
  n.requires_grad = needs(x);
  n.back = [x](GradTape& t, Node& self) {
    auto& g = t.grad_buffer(x);
    for (int c = 0; c < self.grad.channels; ++c)
      for (int y = 0; y < self.grad.height; ++y)
        for (int xx = 0; xx < self.grad.width; ++xx) g.at(c, y, xx) += self.grad.at(c, y, xx);
  };
  return push(std::move(n));
}

template <typename Real>
void GradTape<Real>::accumulate_grad(Var v, const Tensor<Real>& g) {
  if (!needs(v)) return;
  auto& buf = grad_buffer(v);
  if (!buf.same_shape(g)) throw ConfigError("accumulate_grad: shape mismatch");
  for (std::size_t i = 0; i < g.data.size(); ++i) buf.data[i] += g.data[i];
}

template <typename Real>
void GradTape<Real>::backward() {
  if (!record_) throw ConfigError("backward() on a tape that does not record");
  for (Var v = static_cast<Var>(nodes_.size()) - 1; v >= 0; --v) {
    Node& n = nodes_[v];
    if (n.grad.size() == 0) continue;
    if (n.back) n.back(*this, nodes_[v]);
    if (n.ext_grad != nullptr) {
      auto& dst = nodes_[v].ext_grad->data;
      const auto& src = nodes_[v].grad.data;
      for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
    }
  }
}

template class GradTape<float>;
template class GradTape<double>;

}  // namespace srcodec
