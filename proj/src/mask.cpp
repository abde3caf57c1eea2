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

#include "ektvqa/model/mask.hpp"

#include "ektvqa/error.hpp"

namespace ektvqa::model {

std::string mask_mode_name(MaskMode mode) {
  switch (mode) {
    case MaskMode::kConstrained: return "constrained";
    case MaskMode::kUnconstrained: return "unconstrained";
    case MaskMode::kNoKnowledge: return "no_knowledge";
    case MaskMode::kImageLevel: return "image_level";
  }
  return "unknown";
}

AttentionMaskSpec build_attention_mask(std::size_t l, std::size_t m,
                                       std::size_t n, std::size_t d,
                                       MaskMode mode,
                                       bool open_knowledge_context) {
  if (d < 1) fail("E_CONTRACT", "attention mask: D must be >= 1");
  AttentionMaskSpec spec;
  spec.l = l;
  spec.m = m;
  spec.n = n;
  spec.d = d;
  spec.mode = mode;
  const std::size_t e = spec.e();
  if (e == 0) fail("E_CONTRACT", "attention mask: empty sequence");

  if (mode == MaskMode::kUnconstrained) {
    spec.matrix.assign(e * e, 0.0);
    return spec;
  }

  spec.matrix.assign(e * e, nn::kMaskOff);
  auto open = [&](std::size_t i, std::size_t j) {
    spec.matrix[i * e + j] = 0.0;
  };
  auto open_block = [&](std::size_t r0, std::size_t rc, std::size_t c0,
                        std::size_t cc) {
    for (std::size_t i = 0; i < rc; ++i)
      for (std::size_t j = 0; j < cc; ++j) open(r0 + i, c0 + j);
  };

  const std::size_t ctx = l + m + n;        // question | objects | OCR
  const bool knw = mode != MaskMode::kNoKnowledge;
  const std::size_t knw0 = ctx;             // knowledge block start
  const std::size_t prv0 = knw ? ctx + n : ctx;

  // Question, objects and OCR interact freely.
  open_block(0, ctx, 0, ctx);

  if (knw) {
    if (mode == MaskMode::kImageLevel || open_knowledge_context) {
      // Free knowledge rows: open against the whole context and each other.
      open_block(knw0, n, 0, ctx);
      open_block(0, ctx, knw0, n);
      if (mode == MaskMode::kImageLevel) open_block(knw0, n, knw0, n);
    }
    if (mode == MaskMode::kConstrained) {
      // Identity coupling: fact i and OCR token i see each other, nothing
      // else reaches the knowledge rows.
      for (std::size_t i = 0; i < n; ++i) {
        open(knw0 + i, l + m + i);  // knowledge -> its OCR token
        open(l + m + i, knw0 + i);  // OCR token -> its fact
        open(knw0 + i, knw0 + i);   // self
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) open(knw0 + i, knw0 + i);
    }
  }

  // Prediction rows read the full context (and facts) and attend causally
  // to earlier steps; nothing outside the prediction block reads them.
  for (std::size_t step = 0; step < d; ++step) {
    const std::size_t row = prv0 + step;
    for (std::size_t j = 0; j < prv0; ++j) open(row, j);
    for (std::size_t j = 0; j <= step; ++j) open(row, prv0 + j);
  }

  for (std::size_t i = 0; i < e; ++i) {
    bool any = false;
    for (std::size_t j = 0; j < e && !any; ++j) any = spec.open(i, j);
    if (!any) {
      fail("E_MASK_ROW",
           "attention mask: row " + std::to_string(i) + " fully masked");
    }
  }
  return spec;
}

}  // namespace ektvqa::model
