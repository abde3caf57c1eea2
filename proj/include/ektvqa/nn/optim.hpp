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

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ektvqa/nn/params.hpp"
#include "ektvqa/nn/tensor.hpp"

namespace ektvqa::nn {

// Adam with bias correction. Moment buffers are keyed by parameter name and
// allocated on first sight; shape drift afterwards is a contract error.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(double learning_rate = 1e-4, double beta1 = 0.9,
                         double beta2 = 0.999, double epsilon = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

  // Applies one update from the accumulated .grad of every parameter.
  void step(ParamStore& params);

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }
  std::uint64_t step_count() const { return step_count_; }

 private:
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };

  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  std::uint64_t step_count_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace ektvqa::nn
