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

#include "ektvqa/nn/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "ektvqa/error.hpp"

namespace ektvqa::nn {

namespace {

using EMap = Eigen::Map<
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using EMapMut = Eigen::Map<
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    fail("E_SHAPE", std::string(op) + ": shapes " + shape_str(a.shape()) +
                        " and " + shape_str(b.shape()) + " differ");
  }
}

// Rows/cols of a tensor viewed as a 2-D array (rank-1 becomes one row).
std::pair<std::size_t, std::size_t> as_2d(const Tensor& x, const char* op) {
  if (x.rank() == 1) return {1, x.shape()[0]};
  if (x.rank() == 2) return {x.shape()[0], x.shape()[1]};
  fail("E_SHAPE", std::string(op) + ": expected rank 1 or 2, got shape " +
                      shape_str(x.shape()));
}

}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor make_op(Shape shape, std::vector<double> values,
               std::vector<Tensor> inputs,
               std::function<void(TensorNode&)> backward_fn) {
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  if (node->values.size() != numel(node->shape)) {
    fail("E_SHAPE", "tensor values length " +
                        std::to_string(node->values.size()) +
                        " does not match shape " + shape_str(node->shape));
  }
  bool needs = false;
  node->inputs.reserve(inputs.size());
  for (const Tensor& t : inputs) {
    needs = needs || t.requires_grad();
    node->inputs.push_back(t.node());
  }
  node->requires_grad = needs;
  if (needs) node->backward_fn = std::move(backward_fn);
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::size_t n = numel(shape);
  Tensor t = make_op(std::move(shape), std::vector<double>(n, value), {}, {});
  t.node_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  Tensor t = make_op(std::move(shape), std::move(values), {}, {});
  t.node_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({}, {value}, requires_grad);
}

Tensor Tensor::uniform(Shape shape, Rng& rng, double bound,
                       bool requires_grad) {
  return uniform(std::move(shape), rng, -bound, bound, requires_grad);
}

Tensor Tensor::uniform(Shape shape, Rng& rng, double lo, double hi,
                       bool requires_grad) {
  std::size_t n = numel(shape);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return from(std::move(shape), std::move(v), requires_grad);
}

std::size_t Tensor::rows() const {
  return rank() == 1 ? 1 : shape()[0];
}

std::size_t Tensor::cols() const {
  return rank() == 1 ? shape()[0] : shape()[1];
}

const std::vector<double>& Tensor::grad() const {
  node_->ensure_grad();
  return node_->grad;
}

double Tensor::item() const {
  if (size() != 1) {
    fail("E_CONTRACT", "item() on non-scalar tensor of shape " +
                           shape_str(shape()));
  }
  return node_->values[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  return node_->values[r * cols() + c];
}

void Tensor::zero_grad() { node_->grad.assign(node_->values.size(), 0.0); }

// ---- elementwise ----

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = a.values()[i] + b.values()[i];
  return make_op(a.shape(), std::move(out), {a, b}, [](TensorNode& n) {
    for (auto& in : n.inputs) {
      if (!in->requires_grad) continue;
      in->ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) in->grad[i] += n.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = a.values()[i] - b.values()[i];
  return make_op(a.shape(), std::move(out), {a, b}, [](TensorNode& n) {
    auto& a_in = n.inputs[0];
    auto& b_in = n.inputs[1];
    if (a_in->requires_grad) {
      a_in->ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i)
        a_in->grad[i] += n.grad[i];
    }
    if (b_in->requires_grad) {
      b_in->ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i)
        b_in->grad[i] -= n.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = a.values()[i] * b.values()[i];
  return make_op(a.shape(), std::move(out), {a, b}, [](TensorNode& n) {
    auto& a_in = n.inputs[0];
    auto& b_in = n.inputs[1];
    if (a_in->requires_grad) {
      a_in->ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i)
        a_in->grad[i] += n.grad[i] * b_in->values[i];
    }
    if (b_in->requires_grad) {
      b_in->ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i)
        b_in->grad[i] += n.grad[i] * a_in->values[i];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.values()[i] * factor;
  return make_op(x.shape(), std::move(out), {x}, [factor](TensorNode& n) {
    auto& in = n.inputs[0];
    in->ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i)
      in->grad[i] += n.grad[i] * factor;
  });
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = x.values()[i] > 0.0 ? x.values()[i] : 0.0;
  return make_op(x.shape(), std::move(out), {x}, [](TensorNode& n) {
    auto& in = n.inputs[0];
    in->ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i)
      if (in->values[i] > 0.0) in->grad[i] += n.grad[i];
  });
}

Tensor add_row_broadcast(const Tensor& x, const Tensor& bias) {
  auto [r, c] = as_2d(x, "add_row_broadcast");
  if (bias.rank() != 1 || bias.shape()[0] != c) {
    fail("E_SHAPE", "add_row_broadcast: bias " + shape_str(bias.shape()) +
                        " does not match row width of " + shape_str(x.shape()));
  }
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j)
      out[i * c + j] = x.values()[i * c + j] + bias.values()[j];
  return make_op(x.shape(), std::move(out), {x, bias}, [r = r, c = c](TensorNode& n) {
    auto& x_in = n.inputs[0];
    auto& b_in = n.inputs[1];
    if (x_in->requires_grad) {
      x_in->ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i)
        x_in->grad[i] += n.grad[i];
    }
    if (b_in->requires_grad) {
      b_in->ensure_grad();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) b_in->grad[j] += n.grad[i * c + j];
    }
  });
}

Tensor add_scalar(const Tensor& x, const Tensor& s) {
  if (s.size() != 1) fail("E_CONTRACT", "add_scalar: scalar operand expected");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = x.values()[i] + s.values()[0];
  return make_op(x.shape(), std::move(out), {x, s}, [](TensorNode& n) {
    auto& x_in = n.inputs[0];
    auto& s_in = n.inputs[1];
    if (x_in->requires_grad) {
      x_in->ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i)
        x_in->grad[i] += n.grad[i];
    }
    if (s_in->requires_grad) {
      s_in->ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i)
        s_in->grad[0] += n.grad[i];
    }
  });
}

// ---- linear algebra ----

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    fail("E_SHAPE", "matmul: expected rank-2 operands, got " +
                        shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const std::size_t r = a.shape()[0], k = a.shape()[1];
  const std::size_t k2 = b.shape()[0], c = b.shape()[1];
  if (k != k2) {
    fail("E_SHAPE", "matmul: inner dimensions disagree: " +
                        shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  std::vector<double> out(r * c);
  {
    EMap ma(a.values().data(), r, k);
    EMap mb(b.values().data(), k, c);
    EMapMut mo(out.data(), r, c);
    mo.noalias() = ma * mb;
  }
  return make_op({r, c}, std::move(out), {a, b},
                 [r, k, c](TensorNode& n) {
                   auto& a_in = n.inputs[0];
                   auto& b_in = n.inputs[1];
                   EMap g(n.grad.data(), r, c);
                   if (a_in->requires_grad) {
                     a_in->ensure_grad();
                     EMap mb(b_in->values.data(), k, c);
                     EMapMut ga(a_in->grad.data(), r, k);
                     ga.noalias() += g * mb.transpose();
                   }
                   if (b_in->requires_grad) {
                     b_in->ensure_grad();
                     EMap ma(a_in->values.data(), r, k);
                     EMapMut gb(b_in->grad.data(), k, c);
                     gb.noalias() += ma.transpose() * g;
                   }
                 });
}

Tensor matmul_seq(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
    fail("E_SHAPE", "matmul_seq: incompatible shapes " +
                        shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const std::size_t r = a.shape()[0], k = a.shape()[1], c = b.shape()[1];
  std::vector<double> out(r * c, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t)
        acc += a.values()[i * k + t] * b.values()[t * c + j];
      out[i * c + j] = acc;
    }
  }
  return make_op({r, c}, std::move(out), {a, b}, [r, k, c](TensorNode& n) {
    auto& a_in = n.inputs[0];
    auto& b_in = n.inputs[1];
    EMap g(n.grad.data(), r, c);
    if (a_in->requires_grad) {
      a_in->ensure_grad();
      EMap mb(b_in->values.data(), k, c);
      EMapMut ga(a_in->grad.data(), r, k);
      ga.noalias() += g * mb.transpose();
    }
    if (b_in->requires_grad) {
      b_in->ensure_grad();
      EMap ma(a_in->values.data(), r, k);
      EMapMut gb(b_in->grad.data(), k, c);
      gb.noalias() += ma.transpose() * g;
    }
  });
}

Tensor transpose(const Tensor& x) {
  if (x.rank() != 2) {
    fail("E_SHAPE", "transpose: expected rank-2, got " + shape_str(x.shape()));
  }
  const std::size_t r = x.shape()[0], c = x.shape()[1];
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x.values()[i * c + j];
  return make_op({c, r}, std::move(out), {x}, [r, c](TensorNode& n) {
    auto& in = n.inputs[0];
    in->ensure_grad();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j)
        in->grad[i * c + j] += n.grad[j * r + i];
  });
}

Tensor linear(const Tensor& x, const Tensor& w) {
  if (w.rank() != 2) {
    fail("E_SHAPE", "linear: weight must be rank-2, got " +
                        shape_str(w.shape()));
  }
  const bool vector_in = (x.rank() == 1);
  auto [r, in_dim] = as_2d(x, "linear");
  if (in_dim != w.shape()[0]) {
    fail("E_SHAPE", "linear: input " + shape_str(x.shape()) +
                        " incompatible with weight " + shape_str(w.shape()));
  }
  Tensor x2 = vector_in ? reshape(x, {1, in_dim}) : x;
  Tensor y = matmul(x2, w);
  return vector_in ? reshape(y, {w.shape()[1]}) : y;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  Tensor y = linear(x, w);
  if (!b.defined()) return y;
  if (y.rank() == 1) return add(y, b);
  return add_row_broadcast(y, b);
}

// ---- shape ----

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size()) {
    fail("E_SHAPE", "reshape: cannot view " + shape_str(x.shape()) + " as " +
                        shape_str(shape));
  }
  return make_op(std::move(shape), x.values(), {x}, [](TensorNode& n) {
    auto& in = n.inputs[0];
    in->ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i) in->grad[i] += n.grad[i];
  });
}

Tensor slice_rows(const Tensor& x, std::size_t start, std::size_t count) {
  if (x.rank() != 2) {
    fail("E_SHAPE", "slice_rows: expected rank-2, got " + shape_str(x.shape()));
  }
  const std::size_t r = x.shape()[0], c = x.shape()[1];
  if (start + count > r) {
    fail("E_SHAPE", "slice_rows: rows [" + std::to_string(start) + "," +
                        std::to_string(start + count) + ") out of range for " +
                        shape_str(x.shape()));
  }
  std::vector<double> out(x.values().begin() + start * c,
                          x.values().begin() + (start + count) * c);
  return make_op({count, c}, std::move(out), {x}, [start, c](TensorNode& n) {
    auto& in = n.inputs[0];
    in->ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i)
      in->grad[start * c + i] += n.grad[i];
  });
}

Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count) {
  if (x.rank() != 2) {
    fail("E_SHAPE", "slice_cols: expected rank-2, got " + shape_str(x.shape()));
  }
  const std::size_t r = x.shape()[0], c = x.shape()[1];
  if (start + count > c) {
    fail("E_SHAPE", "slice_cols: cols out of range for " + shape_str(x.shape()));
  }
  std::vector<double> out(r * count);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < count; ++j)
      out[i * count + j] = x.values()[i * c + start + j];
  return make_op({r, count}, std::move(out), {x},
                 [r, c, start, count](TensorNode& n) {
                   auto& in = n.inputs[0];
                   in->ensure_grad();
                   for (std::size_t i = 0; i < r; ++i)
                     for (std::size_t j = 0; j < count; ++j)
                       in->grad[i * c + start + j] += n.grad[i * count + j];
                 });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) fail("E_CONTRACT", "concat_cols: no parts");
  const std::size_t r = parts[0].shape()[0];
  std::size_t c = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != 2 || p.shape()[0] != r) {
      fail("E_SHAPE", "concat_cols: row counts differ");
    }
    c += p.shape()[1];
  }
  std::vector<double> out(r * c);
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    const std::size_t pc = p.shape()[1];
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < pc; ++j)
        out[i * c + offset + j] = p.values()[i * pc + j];
    offset += pc;
  }
  return make_op({r, c}, std::move(out), parts, [r, c](TensorNode& n) {
    std::size_t offset = 0;
    for (auto& in : n.inputs) {
      const std::size_t pc = in->shape[1];
      if (in->requires_grad) {
        in->ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < pc; ++j)
            in->grad[i * pc + j] += n.grad[i * c + offset + j];
      }
      offset += pc;
    }
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) fail("E_CONTRACT", "concat_rows: no parts");
  const std::size_t c = parts[0].shape().back();
  std::size_t r = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != 2 || p.shape()[1] != c) {
      fail("E_SHAPE", "concat_rows: column counts differ");
    }
    r += p.shape()[0];
  }
  std::vector<double> out;
  out.reserve(r * c);
  for (const Tensor& p : parts)
    out.insert(out.end(), p.values().begin(), p.values().end());
  return make_op({r, c}, std::move(out), parts, [](TensorNode& n) {
    std::size_t offset = 0;
    for (auto& in : n.inputs) {
      const std::size_t sz = in->values.size();
      if (in->requires_grad) {
        in->ensure_grad();
        for (std::size_t i = 0; i < sz; ++i)
          in->grad[i] += n.grad[offset + i];
      }
      offset += sz;
    }
  });
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) fail("E_CONTRACT", "stack_rows: no rows");
  const std::size_t c = rows[0].size();
  for (const Tensor& rt : rows) {
    if (rt.rank() != 1 || rt.size() != c) {
      fail("E_SHAPE", "stack_rows: all rows must be rank-1 of equal length");
    }
  }
  std::vector<double> out;
  out.reserve(rows.size() * c);
  for (const Tensor& rt : rows)
    out.insert(out.end(), rt.values().begin(), rt.values().end());
  return make_op({rows.size(), c}, std::move(out), rows, [c](TensorNode& n) {
    for (std::size_t i = 0; i < n.inputs.size(); ++i) {
      auto& in = n.inputs[i];
      if (!in->requires_grad) continue;
      in->ensure_grad();
      for (std::size_t j = 0; j < c; ++j) in->grad[j] += n.grad[i * c + j];
    }
  });
}

Tensor concat_vec(const std::vector<Tensor>& parts) {
  if (parts.empty()) fail("E_CONTRACT", "concat_vec: no parts");
  std::vector<double> out;
  for (const Tensor& p : parts) {
    if (p.rank() != 1) {
      fail("E_SHAPE", "concat_vec: expected rank-1 parts, got " +
                          shape_str(p.shape()));
    }
    out.insert(out.end(), p.values().begin(), p.values().end());
  }
  const std::size_t total = out.size();
  return make_op({total}, std::move(out), parts, [](TensorNode& n) {
    std::size_t offset = 0;
    for (auto& in : n.inputs) {
      const std::size_t sz = in->values.size();
      if (in->requires_grad) {
        in->ensure_grad();
        for (std::size_t i = 0; i < sz; ++i)
          in->grad[i] += n.grad[offset + i];
      }
      offset += sz;
    }
  });
}

Tensor select_element(const Tensor& x, std::size_t i) {
  if (x.rank() != 1 || i >= x.size()) {
    fail("E_CONTRACT", "select_element: index " + std::to_string(i) +
                           " out of range for " + shape_str(x.shape()));
  }
  return make_op({}, {x.values()[i]}, {x}, [i](TensorNode& n) {
    auto& in = n.inputs[0];
    in->ensure_grad();
    in->grad[i] += n.grad[0];
  });
}

Tensor select_column(const Tensor& x, std::size_t j) {
  if (x.rank() != 2 || j >= x.shape()[1]) {
    fail("E_CONTRACT", "select_column: column " + std::to_string(j) +
                           " out of range for " + shape_str(x.shape()));
  }
  const std::size_t r = x.shape()[0], c = x.shape()[1];
  std::vector<double> out(r);
  for (std::size_t i = 0; i < r; ++i) out[i] = x.values()[i * c + j];
  return make_op({r}, std::move(out), {x}, [c, j](TensorNode& n) {
    auto& in = n.inputs[0];
    in->ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i)
      in->grad[i * c + j] += n.grad[i];
  });
}

Tensor select_row(const Tensor& x, std::size_t i) {
  if (x.rank() != 2 || i >= x.shape()[0]) {
    fail("E_CONTRACT", "select_row: row " + std::to_string(i) +
                           " out of range for " + shape_str(x.shape()));
  }
  const std::size_t c = x.shape()[1];
  std::vector<double> out(x.values().begin() + i * c,
                          x.values().begin() + (i + 1) * c);
  return make_op({c}, std::move(out), {x}, [i, c](TensorNode& n) {
    auto& in = n.inputs[0];
    in->ensure_grad();
    for (std::size_t j = 0; j < c; ++j) in->grad[i * c + j] += n.grad[j];
  });
}

// ---- reductions / normalization ----

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return make_op({}, {s}, {x}, [](TensorNode& n) {
    auto& in = n.inputs[0];
    in->ensure_grad();
    for (double& g : in->grad) g += n.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  auto [r, d] = as_2d(x, "layer_norm");
  if (gamma.size() != d || beta.size() != d) {
    fail("E_SHAPE", "layer_norm: gamma/beta must have width " +
                        std::to_string(d));
  }
  if (d < 1 || eps <= 0.0) fail("E_CONTRACT", "layer_norm: d >= 1, eps > 0");
  std::vector<double> out(x.size());
  // Cache per-row mean and inverse std for the backward pass.
  auto stats = std::make_shared<std::vector<double>>(2 * r);
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = x.values().data() + i * d;
    double m = 0.0;
    for (std::size_t j = 0; j < d; ++j) m += row[j];
    m /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - m) * (row[j] - m);
    var /= static_cast<double>(d);
    const double inv_std = 1.0 / std::sqrt(var + eps);
    (*stats)[2 * i] = m;
    (*stats)[2 * i + 1] = inv_std;
    for (std::size_t j = 0; j < d; ++j) {
      out[i * d + j] =
          gamma.values()[j] * (row[j] - m) * inv_std + beta.values()[j];
    }
  }
  return make_op(
      x.shape(), std::move(out), {x, gamma, beta},
      [r = r, d = d, stats](TensorNode& n) {
        auto& x_in = n.inputs[0];
        auto& g_in = n.inputs[1];
        auto& b_in = n.inputs[2];
        if (g_in->requires_grad) g_in->ensure_grad();
        if (b_in->requires_grad) b_in->ensure_grad();
        if (x_in->requires_grad) x_in->ensure_grad();
        const double dd = static_cast<double>(d);
        for (std::size_t i = 0; i < r; ++i) {
          const double m = (*stats)[2 * i];
          const double inv_std = (*stats)[2 * i + 1];
          const double* row = x_in->values.data() + i * d;
          const double* g = n.grad.data() + i * d;
          if (g_in->requires_grad || b_in->requires_grad) {
            for (std::size_t j = 0; j < d; ++j) {
              const double xhat = (row[j] - m) * inv_std;
              if (g_in->requires_grad) g_in->grad[j] += g[j] * xhat;
              if (b_in->requires_grad) b_in->grad[j] += g[j];
            }
          }
          if (x_in->requires_grad) {
            // dX for y = gamma * (x - m) * inv_std + beta.
            double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              const double dxhat = g[j] * g_in->values[j];
              const double xhat = (row[j] - m) * inv_std;
              sum_dxhat += dxhat;
              sum_dxhat_xhat += dxhat * xhat;
            }
            for (std::size_t j = 0; j < d; ++j) {
              const double dxhat = g[j] * g_in->values[j];
              const double xhat = (row[j] - m) * inv_std;
              x_in->grad[i * d + j] +=
                  inv_std *
                  (dxhat - sum_dxhat / dd - xhat * sum_dxhat_xhat / dd);
            }
          }
        }
      });
}

Tensor softmax_rows(const Tensor& x) {
  auto [r, c] = as_2d(x, "softmax_rows");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = x.values().data() + i * c;
    double mx = row[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      out[i * c + j] = std::exp(row[j] - mx);
      denom += out[i * c + j];
    }
    if (denom <= 0.0) {
      fail("E_MASK_ROW", "softmax_rows: row " + std::to_string(i) +
                             " is fully masked (all -inf)");
    }
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= denom;
  }
  return make_op(x.shape(), std::move(out), {x}, [r = r, c = c](TensorNode& n) {
    auto& in = n.inputs[0];
    in->ensure_grad();
    for (std::size_t i = 0; i < r; ++i) {
      const double* y = n.values.data() + i * c;
      const double* g = n.grad.data() + i * c;
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += y[j] * g[j];
      for (std::size_t j = 0; j < c; ++j)
        in->grad[i * c + j] += y[j] * (g[j] - dot);
    }
  });
}

Tensor st_scale(const Tensor& x, const Tensor& gate) {
  if (gate.size() != 1) {
    fail("E_CONTRACT", "st_scale: gate must be scalar");
  }
  return make_op(x.shape(), x.values(), {x, gate}, [](TensorNode& n) {
    auto& x_in = n.inputs[0];
    auto& g_in = n.inputs[1];
    if (x_in->requires_grad) {
      x_in->ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i)
        x_in->grad[i] += n.grad[i];
    }
    if (g_in->requires_grad) {
      g_in->ensure_grad();
      double acc = 0.0;
      for (std::size_t i = 0; i < n.grad.size(); ++i)
        acc += n.grad[i] * x_in->values[i];
      g_in->grad[0] += acc;
    }
  });
}

Tensor bce_with_logits(const Tensor& logits, const std::vector<double>& targets,
                       const std::vector<double>& row_mask) {
  auto [r, c] = as_2d(logits, "bce_with_logits");
  if (targets.size() != logits.size()) {
    fail("E_SHAPE", "bce_with_logits: target size mismatch");
  }
  if (row_mask.size() != r) {
    fail("E_SHAPE", "bce_with_logits: row mask size mismatch");
  }
  double active = 0.0;
  for (double m : row_mask) active += (m != 0.0) ? 1.0 : 0.0;
  const double denom = std::max(1.0, active) * static_cast<double>(c);
  double loss = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    if (row_mask[i] == 0.0) continue;
    for (std::size_t j = 0; j < c; ++j) {
      const double z = logits.values()[i * c + j];
      const double t = targets[i * c + j];
      // Numerically stable: max(z,0) - z*t + log(1 + exp(-|z|)).
      loss += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
    }
  }
  loss /= denom;
  auto tgt = std::make_shared<std::vector<double>>(targets);
  auto msk = std::make_shared<std::vector<double>>(row_mask);
  return make_op({}, {loss}, {logits},
                 [r = r, c = c, denom, tgt, msk](TensorNode& n) {
                   auto& in = n.inputs[0];
                   in->ensure_grad();
                   const double g = n.grad[0] / denom;
                   for (std::size_t i = 0; i < r; ++i) {
                     if ((*msk)[i] == 0.0) continue;
                     for (std::size_t j = 0; j < c; ++j) {
                       const double z = in->values[i * c + j];
                       const double sig = 1.0 / (1.0 + std::exp(-z));
                       in->grad[i * c + j] += g * (sig - (*tgt)[i * c + j]);
                     }
                   }
                 });
}

// ---- autodiff driver ----

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    fail("E_CONTRACT", "backward: loss must be a scalar tensor");
  }
  // Iterative post-order topological sort (graphs can be thousands deep).
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> visited;
  std::vector<std::pair<TensorNode*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      TensorNode* child = node->inputs[next++].get();
      if (child->requires_grad && !visited.count(child)) {
        visited.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  // Fresh upstream grads for interior nodes; leaves (parameters) accumulate.
  for (TensorNode* n : order) {
    if (n->backward_fn) n->grad.assign(n->values.size(), 0.0);
    else n->ensure_grad();
  }
  loss.node()->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
  }
}

bool all_finite(const Tensor& x) {
  for (double v : x.values())
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace ektvqa::nn
