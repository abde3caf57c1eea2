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

#include "ektvqa/nn/finite_diff.hpp"

#include <algorithm>
#include <cmath>

#include "ektvqa/rng.hpp"

namespace ektvqa::nn {

double finite_diff_check(
    const std::function<Tensor(const std::vector<Tensor>&)>& f,
    std::vector<Tensor> leaves, double eps,
    std::size_t max_coords_per_tensor, std::uint64_t sample_seed) {
  for (Tensor& leaf : leaves) leaf.set_requires_grad(true);

  // Analytic gradients.
  for (Tensor& leaf : leaves) leaf.zero_grad();
  Tensor loss = f(leaves);
  backward(loss);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(leaves.size());
  for (Tensor& leaf : leaves) analytic.push_back(leaf.grad());

  Rng rng(sample_seed);
  double worst = 0.0;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    Tensor& leaf = leaves[li];
    const std::size_t n = leaf.size();
    std::vector<std::size_t> coords;
    if (max_coords_per_tensor == 0 || n <= max_coords_per_tensor) {
      coords.resize(n);
      for (std::size_t i = 0; i < n; ++i) coords[i] = i;
    } else {
      for (std::size_t i = 0; i < max_coords_per_tensor; ++i)
        coords.push_back(rng.index(n));
    }
    for (std::size_t i : coords) {
      const double saved = leaf.values()[i];
      leaf.mutable_values()[i] = saved + eps;
      const double up = f(leaves).item();
      leaf.mutable_values()[i] = saved - eps;
      const double down = f(leaves).item();
      leaf.mutable_values()[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[li][i];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace ektvqa::nn
