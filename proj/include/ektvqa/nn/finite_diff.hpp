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

#include <functional>
#include <vector>

#include "ektvqa/nn/tensor.hpp"

namespace ektvqa::nn {

// Gradient-checking oracle. `f` rebuilds the forward graph from the given
// leaf tensors and returns a scalar loss. For each checked coordinate the
// analytic gradient is compared against a central difference; the return
// value is max over coordinates of
//   |analytic - central| / max(1, |analytic|).
//
// `max_coords_per_tensor` == 0 checks every coordinate; a positive value
// checks a deterministic random sample (for wide projection matrices).
double finite_diff_check(
    const std::function<Tensor(const std::vector<Tensor>&)>& f,
    std::vector<Tensor> leaves, double eps = 1e-5,
    std::size_t max_coords_per_tensor = 0, std::uint64_t sample_seed = 17);

}  // namespace ektvqa::nn
