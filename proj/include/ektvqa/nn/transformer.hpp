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

#include <string>
#include <vector>

#include "ektvqa/nn/params.hpp"
#include "ektvqa/nn/tensor.hpp"

namespace ektvqa::nn {

// Multi-head self-attention weights. Defaults are the model's production
// configuration (eight heads, width 768); tests shrink both.
struct AttentionParams {
  std::size_t n_heads = 8;
  std::size_t d_model = 768;
  std::vector<Tensor> wq, wk, wv;  // per head, [d_model, d_head]
  Tensor wo;                       // [d_model, d_model]
  Tensor bo;                       // [d_model]

  std::size_t d_head() const { return d_model / n_heads; }

  static AttentionParams create(ParamStore& store, const std::string& prefix,
                                std::size_t n_heads, std::size_t d_model,
                                Rng& rng);
};

struct TransformerLayerParams {
  AttentionParams attn;
  Tensor ln1_gamma, ln1_beta;
  Tensor ff_w1, ff_b1;  // [d, 4d], [4d]
  Tensor ff_w2, ff_b2;  // [4d, d], [d]
  Tensor ln2_gamma, ln2_beta;

  static TransformerLayerParams create(ParamStore& store,
                                       const std::string& prefix,
                                       std::size_t n_heads,
                                       std::size_t d_model, Rng& rng);
};

struct TransformerParams {
  std::vector<TransformerLayerParams> layers;

  static TransformerParams create(ParamStore& store, std::size_t n_layers,
                                  std::size_t n_heads, std::size_t d_model,
                                  Rng& rng);
};

// Scaled-dot-product self-attention with `mask_bias` ([E, E], entries 0 or
// the -inf sentinel) added to the logits before softmax. Masked columns get
// exactly zero weight; a fully masked row is a caller bug and raises
// E_MASK_ROW.
Tensor masked_multihead_attention(const Tensor& x, const Tensor& mask_bias,
                                  const AttentionParams& params);

// Post-norm stack: each layer is masked attention + residual + layer norm,
// then feed-forward (4x inner width, ReLU) + residual + layer norm. An
// empty stack is the identity.
Tensor transformer_forward(const Tensor& x, const Tensor& mask_bias,
                           const TransformerParams& params,
                           double ln_eps = 1e-6);

}  // namespace ektvqa::nn
