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
#include <string>
#include <vector>

#include "ektvqa/nn/tensor.hpp"

namespace ektvqa::model {

// Interaction regimes for the additive attention bias.
//
//   kConstrained   - question/object/OCR fully open; knowledge coupled to
//                    its own OCR token through N x N identity blocks and
//                    otherwise closed; prediction rows causal over
//                    themselves and open to all context.
//   kUnconstrained - the all-zero matrix.
//   kNoKnowledge   - no knowledge rows at all (E = L+M+N+D).
//   kImageLevel    - knowledge attached as free rows: fully open to and
//                    from the context, no identity coupling.
enum class MaskMode { kConstrained, kUnconstrained, kNoKnowledge, kImageLevel };

std::string mask_mode_name(MaskMode mode);

// E x E additive bias over the row order [question | objects | OCR |
// knowledge | previous predictions]; entries are 0 (open) or the -inf
// sentinel (closed).
struct AttentionMaskSpec {
  std::size_t l = 0, m = 0, n = 0, d = 0;
  MaskMode mode = MaskMode::kConstrained;
  std::vector<double> matrix;  // row-major E x E

  std::size_t e() const {
    return mode == MaskMode::kNoKnowledge ? l + m + n + d : l + m + n + n + d;
  }
  bool open(std::size_t i, std::size_t j) const {
    return matrix[i * e() + j] == 0.0;
  }
  nn::Tensor tensor() const {
    return nn::Tensor::from({e(), e()}, matrix);
  }
};

// Builds the bias matrix for the given block sizes and mode. D must be at
// least 1; a construction that would leave any row fully masked fails with
// E_MASK_ROW. `open_knowledge_context` additionally opens the
// knowledge<->question and knowledge<->object blocks in constrained mode
// (an experimentation flag; the default keeps them closed).
AttentionMaskSpec build_attention_mask(std::size_t l, std::size_t m,
                                       std::size_t n, std::size_t d,
                                       MaskMode mode,
                                       bool open_knowledge_context = false);

}  // namespace ektvqa::model
