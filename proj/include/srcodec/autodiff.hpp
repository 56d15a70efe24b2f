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
#include <functional>
#include <span>
#include <vector>

#include "srcodec/tensor.hpp"

namespace srcodec {

// Reverse-mode tape over whole-tensor operations. Nodes are appended in
// evaluation order, so walking them backwards is a reverse topological
// order. With recording disabled the tape is a plain forward evaluator.
template <typename Real>
class GradTape {
 public:
  using Var = int;

  explicit GradTape(bool record = true) : record_(record) {}

  bool recording() const { return record_; }

  Var constant(Tensor<Real> value);
  // Leaf that refers to external storage; after backward() its gradient is
  // added into *grad (when non-null).
  Var parameter(const Tensor<Real>& value, Tensor<Real>* grad);

  Var conv2d(Var x, Var weight, Var bias, int dilation);
  Var leaky_relu(Var x, Real slope);
  Var add(Var a, Var b);
  Var concat(std::span<const Var> parts);
  Var pixel_shuffle(Var x);
  // Keeps the top-left height x width window.
  Var crop(Var x, int height, int width);

  const Tensor<Real>& value(Var v) const;
  // Seeds an adjoint, typically the derivative of a loss w.r.t. a head output.
  void accumulate_grad(Var v, const Tensor<Real>& g);
  void backward();

  std::size_t size() const { return nodes_.size(); }
  // Hash of the sign pattern of every leaky ReLU input seen so far. Two
  // evaluations with equal signatures lie on the same linear piece.
  std::uint64_t kink_signature() const { return kinks_; }

 private:
  struct Node {
    Tensor<Real> own;
    const Tensor<Real>* ext = nullptr;
    Tensor<Real>* ext_grad = nullptr;
    Tensor<Real> grad;
    bool requires_grad = false;
    std::function<void(GradTape&, Node&)> back;
  };

  Var push(Node node);
  Tensor<Real>& grad_buffer(Var v);
  bool needs(Var v) const { return nodes_[v].requires_grad; }

  bool record_;
  std::vector<Node> nodes_;
  std::uint64_t kinks_ = 1469598103934665603ull;
};

extern template class GradTape<float>;
extern template class GradTape<double>;

}  // namespace srcodec
