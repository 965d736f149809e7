/*
 * Copyright 2026 the momics authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "core/common.hpp"

namespace momics::nn {

// Reverse-mode automatic differentiation over dense double matrices.
//
// A Tape records op nodes in construction order (define-by-run); backward()
// walks it in reverse, so topological order is free. Parameter leaves are
// Nodes owned outside the tape (see ParamStore in layers.hpp); their grads
// survive Tape::clear() and feed the optimizer. The reduction order of every
// op is fixed, so repeated runs with identical inputs are bit-identical.

class Node {
 public:
  Mat value;
  bool requires_grad = false;
  std::function<void()> backprop;  // accumulates into parent grads

  Node() = default;
  Node(Mat v, bool rg) : value(std::move(v)), requires_grad(rg) {}

  Eigen::Index rows() const { return value.rows(); }
  Eigen::Index cols() const { return value.cols(); }

  // Lazily-allocated gradient, zero before the first accumulation.
  Mat& grad() {
    if (grad_.size() == 0) grad_ = Mat::Zero(value.rows(), value.cols());
    return grad_;
  }
  bool has_grad() const { return grad_.size() != 0; }
  void zero_grad() { grad_.resize(0, 0); }
  void accumulate(const Mat& g) {
    if (requires_grad) grad() += g;
  }

 private:
  Mat grad_;
};

class Tape {
 public:
  Node* make(Mat value, bool requires_grad,
             std::function<void()> backprop = nullptr);
  Node* constant(Mat value) { return make(std::move(value), false); }
  Node* constant(double v) { return constant(Mat::Constant(1, 1, v)); }

  // Seeds d(loss)/d(loss) = 1 and runs all recorded backprop closures in
  // reverse order. `loss` must be 1x1 and live on this tape.
  void backward(Node* loss);

  void clear();
  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<std::unique_ptr<Node>> nodes_;
};

// ---- ops ----------------------------------------------------------------
// All ops allocate their result on the tape; inputs may be tape nodes or
// external parameter nodes.

Node* matmul(Tape& t, Node* a, Node* b, bool trans_a = false,
             bool trans_b = false);
Node* transpose(Tape& t, Node* a);
Node* add(Tape& t, Node* a, Node* b);
Node* sub(Tape& t, Node* a, Node* b);
Node* mul(Tape& t, Node* a, Node* b);  // elementwise
Node* scale(Tape& t, Node* a, double s);
Node* add_rowvec(Tape& t, Node* a, Node* row);  // row broadcast over rows
Node* mul_rowvec(Tape& t, Node* a, Node* row);

Node* concat_rows(Tape& t, const std::vector<Node*>& parts);
Node* slice_rows(Tape& t, Node* a, int first, int count);
Node* select_rows(Tape& t, Node* a, std::vector<int> index);
Node* concat_cols(Tape& t, const std::vector<Node*>& parts);
Node* slice_cols(Tape& t, Node* a, int first, int count);
Node* select_cols(Tape& t, Node* a, std::vector<int> index);

Node* softmax_rows(Tape& t, Node* a);
Node* layer_norm_rows(Tape& t, Node* a, double eps);
Node* tanh(Tape& t, Node* a);
Node* selu(Tape& t, Node* a);
Node* sigmoid(Tape& t, Node* a);
Node* gelu(Tape& t, Node* a);      // exact (erf) form
Node* softplus(Tape& t, Node* a);  // numerically stable
Node* abs(Tape& t, Node* a);
Node* logsumexp_rows(Tape& t, Node* a);  // (n x c) -> (n x 1)

Node* sum_all(Tape& t, Node* a);   // -> 1x1
Node* mean_all(Tape& t, Node* a);  // -> 1x1

// Multi-head scaled dot-product attention without any linear projections:
// splits the feature dimension into `heads` blocks, attends per head, and
// concatenates head outputs. q: (nq x d), k/v: (nk x d), d % heads == 0.
Node* scaled_dot_attention(Tape& t, Node* q, Node* k, Node* v, int heads);

// SELU constants (Klambauer et al. values, shared with alpha-dropout).
inline constexpr double kSeluAlpha = 1.6732632423543772848170429916717;
inline constexpr double kSeluLambda = 1.0507009873554804934193349852946;

}  // namespace momics::nn
