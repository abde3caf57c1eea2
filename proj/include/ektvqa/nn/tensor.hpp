// Copyright 2026 The EKTVQA Authors
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
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ektvqa/rng.hpp"

namespace ektvqa::nn {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Additive attention-mask sentinel standing in for -inf. Large enough that
// exp() underflows to exactly 0.0 in float64, small enough not to produce
// NaN through softmax arithmetic.
inline constexpr double kMaskOff = -1e9;

struct TensorNode {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // sized lazily during backward
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> inputs;
  // Pulls this node's grad into its inputs' grads.
  std::function<void(TensorNode&)> backward_fn;

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }
};

// Value-semantics handle to a node in the computation graph. Ops build
// fresh nodes; parameters are long-lived nodes reused across graphs.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  // Uniform init in [-bound, +bound] (bound = 1/sqrt(fan_in) at call sites).
  static Tensor uniform(Shape shape, Rng& rng, double bound,
                        bool requires_grad = true);
  static Tensor uniform(Shape shape, Rng& rng, double lo, double hi,
                        bool requires_grad);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return node_->values.size(); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  const std::vector<double>& values() const { return node_->values; }
  std::vector<double>& mutable_values() { return node_->values; }
  const std::vector<double>& grad() const;
  bool requires_grad() const { return node_->requires_grad; }

  double item() const;                  // scalar tensors only
  double at(std::size_t i) const { return node_->values[i]; }
  double at(std::size_t r, std::size_t c) const;

  void zero_grad();
  void set_requires_grad(bool v) { node_->requires_grad = v; }

  std::shared_ptr<TensorNode> node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}
  std::shared_ptr<TensorNode> node_;

  friend Tensor make_op(Shape shape, std::vector<double> values,
                        std::vector<Tensor> inputs,
                        std::function<void(TensorNode&)> backward_fn);
};

// Internal op constructor; requires_grad is inherited from the inputs.
Tensor make_op(Shape shape, std::vector<double> values,
               std::vector<Tensor> inputs,
               std::function<void(TensorNode&)> backward_fn);

// ---- elementwise / arithmetic ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor relu(const Tensor& x);
// Broadcast a rank-1 bias [c] across the rows of x [r, c].
Tensor add_row_broadcast(const Tensor& x, const Tensor& bias);
// Broadcast-add a scalar tensor to every element of x.
Tensor add_scalar(const Tensor& x, const Tensor& s);

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);
// matmul with a strictly sequential inner-product loop. Summation order is
// position-stable, so rows/columns contributing exact zeros (e.g. masked
// attention columns) cannot perturb rounding; used where structurally
// equivalent graphs of different widths must agree bitwise.
Tensor matmul_seq(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);
// y = x W (+ b). x may be rank-1 [in] or rank-2 [rows, in].
Tensor linear(const Tensor& x, const Tensor& w);
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// ---- shape ----
Tensor reshape(const Tensor& x, Shape shape);
Tensor slice_rows(const Tensor& x, std::size_t start, std::size_t count);
Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
// Stack rank-1 tensors [c] into [n, c].
Tensor stack_rows(const std::vector<Tensor>& rows);
// Concatenate rank-1 tensors end to end.
Tensor concat_vec(const std::vector<Tensor>& parts);
// Element i of a rank-1 tensor as a scalar tensor.
Tensor select_element(const Tensor& x, std::size_t i);
// Column j of x [r, c] as a rank-1 tensor [r].
Tensor select_column(const Tensor& x, std::size_t j);
// Row i of x [r, c] as a rank-1 tensor [c].
Tensor select_row(const Tensor& x, std::size_t i);

// ---- reductions / normalization ----
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Per-row zero-mean/unit-variance, scaled by gamma and shifted by beta.
// x may be rank-1 [d] or rank-2 [rows, d]; gamma/beta are [d].
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-6);
Tensor softmax_rows(const Tensor& x);

// Straight-through scalar gate: forward returns x unchanged, backward
// additionally routes sum(x * upstream) into `gate`. Lets a hard argmax
// selection pass loss signal to the scoring parameters behind `gate`.
Tensor st_scale(const Tensor& x, const Tensor& gate);

// Multi-label binary cross-entropy on logits [s, c] against 0/1 targets,
// averaged over active rows (row_mask[i] != 0) and columns. Rows with
// row_mask 0 contribute nothing.
Tensor bce_with_logits(const Tensor& logits, const std::vector<double>& targets,
                       const std::vector<double>& row_mask);

// ---- autodiff driver ----
// Reverse-mode pass from a scalar loss. Accumulates into .grad of every
// requires_grad node reachable from `loss`; callers zero parameter grads
// beforehand (accumulation across a batch is intentional).
void backward(const Tensor& loss);

bool all_finite(const Tensor& x);

}  // namespace ektvqa::nn
