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

#include "ektvqa/nn/optim.hpp"

#include <cmath>

#include "ektvqa/error.hpp"

namespace ektvqa::nn {

void AdamOptimizer::step(ParamStore& params) {
  ++step_count_;
  const double t = static_cast<double>(step_count_);
  const double bc1 = 1.0 - std::pow(beta1_, t);
  const double bc2 = 1.0 - std::pow(beta2_, t);
  for (auto& [name, p] : params.entries()) {
    Moments& mo = moments_[name];
    const std::size_t n = p.size();
    if (mo.m.empty()) {
      mo.m.assign(n, 0.0);
      mo.v.assign(n, 0.0);
    } else if (mo.m.size() != n) {
      fail("E_CONTRACT", "adam: parameter " + name +
                             " changed size between steps");
    }
    const std::vector<double>& g = p.grad();
    std::vector<double>& values = p.mutable_values();
    for (std::size_t i = 0; i < n; ++i) {
      mo.m[i] = beta1_ * mo.m[i] + (1.0 - beta1_) * g[i];
      mo.v[i] = beta2_ * mo.v[i] + (1.0 - beta2_) * g[i] * g[i];
      const double m_hat = mo.m[i] / bc1;
      const double v_hat = mo.v[i] / bc2;
      values[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
  }
}

}  // namespace ektvqa::nn
