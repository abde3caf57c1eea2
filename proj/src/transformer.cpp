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

#include "ektvqa/nn/transformer.hpp"

#include <cmath>

#include "ektvqa/error.hpp"

namespace ektvqa::nn {

AttentionParams AttentionParams::create(ParamStore& store,
                                        const std::string& prefix,
                                        std::size_t n_heads,
                                        std::size_t d_model, Rng& rng) {
  if (n_heads == 0 || d_model % n_heads != 0) {
    fail("E_CONTRACT", "attention: d_model " + std::to_string(d_model) +
                           " not divisible by n_heads " +
                           std::to_string(n_heads));
  }
  AttentionParams p;
  p.n_heads = n_heads;
  p.d_model = d_model;
  const std::size_t dh = p.d_head();
  const double bound = 1.0 / std::sqrt(static_cast<double>(d_model));
  for (std::size_t h = 0; h < n_heads; ++h) {
    const std::string hp = prefix + ".heads." + std::to_string(h);
    p.wq.push_back(store.create(hp + ".wq",
                                Tensor::uniform({d_model, dh}, rng, bound)));
    p.wk.push_back(store.create(hp + ".wk",
                                Tensor::uniform({d_model, dh}, rng, bound)));
    p.wv.push_back(store.create(hp + ".wv",
                                Tensor::uniform({d_model, dh}, rng, bound)));
  }
  p.wo = store.create(prefix + ".wo",
                      Tensor::uniform({d_model, d_model}, rng, bound));
  p.bo = store.create(prefix + ".bo", Tensor::zeros({d_model}, true));
  return p;
}

TransformerLayerParams TransformerLayerParams::create(ParamStore& store,
                                                      const std::string& prefix,
                                                      std::size_t n_heads,
                                                      std::size_t d_model,
                                                      Rng& rng) {
  TransformerLayerParams p;
  p.attn = AttentionParams::create(store, prefix + ".attn", n_heads, d_model,
                                   rng);
  const std::size_t d_ff = 4 * d_model;
  const double b1 = 1.0 / std::sqrt(static_cast<double>(d_model));
  const double b2 = 1.0 / std::sqrt(static_cast<double>(d_ff));
  p.ln1_gamma = store.create(prefix + ".ln1.gamma",
                             Tensor::full({d_model}, 1.0, true));
  p.ln1_beta = store.create(prefix + ".ln1.beta", Tensor::zeros({d_model}, true));
  p.ff_w1 = store.create(prefix + ".ff.w1",
                         Tensor::uniform({d_model, d_ff}, rng, b1));
  p.ff_b1 = store.create(prefix + ".ff.b1", Tensor::zeros({d_ff}, true));
  p.ff_w2 = store.create(prefix + ".ff.w2",
                         Tensor::uniform({d_ff, d_model}, rng, b2));
  p.ff_b2 = store.create(prefix + ".ff.b2", Tensor::zeros({d_model}, true));
  p.ln2_gamma = store.create(prefix + ".ln2.gamma",
                             Tensor::full({d_model}, 1.0, true));
  p.ln2_beta = store.create(prefix + ".ln2.beta", Tensor::zeros({d_model}, true));
  return p;
}

TransformerParams TransformerParams::create(ParamStore& store,
                                            std::size_t n_layers,
                                            std::size_t n_heads,
                                            std::size_t d_model, Rng& rng) {
  TransformerParams p;
  for (std::size_t i = 0; i < n_layers; ++i) {
    p.layers.push_back(TransformerLayerParams::create(
        store, "layers." + std::to_string(i), n_heads, d_model, rng));
  }
  return p;
}

Tensor masked_multihead_attention(const Tensor& x, const Tensor& mask_bias,
                                  const AttentionParams& params) {
  if (x.rank() != 2 || x.shape()[1] != params.d_model) {
    fail("E_SHAPE", "attention: input " + shape_str(x.shape()) +
                        " does not match d_model " +
                        std::to_string(params.d_model));
  }
  const std::size_t e = x.shape()[0];
  if (mask_bias.rank() != 2 || mask_bias.shape()[0] != e ||
      mask_bias.shape()[1] != e) {
    fail("E_SHAPE", "attention: mask " + shape_str(mask_bias.shape()) +
                        " does not match sequence length " +
                        std::to_string(e));
  }
  // A fully masked row would silently renormalize into a uniform
  // distribution after max subtraction; reject it up front.
  for (std::size_t i = 0; i < e; ++i) {
    bool any_open = false;
    for (std::size_t j = 0; j < e; ++j) {
      if (mask_bias.at(i, j) > kMaskOff / 2) {
        any_open = true;
        break;
      }
    }
    if (!any_open) {
      fail("E_MASK_ROW",
           "attention: row " + std::to_string(i) + " is fully masked");
    }
  }

  const double inv_sqrt_dh =
      1.0 / std::sqrt(static_cast<double>(params.d_head()));
  std::vector<Tensor> heads;
  heads.reserve(params.n_heads);
  for (std::size_t h = 0; h < params.n_heads; ++h) {
    Tensor q = matmul(x, params.wq[h]);
    Tensor k = matmul(x, params.wk[h]);
    Tensor v = matmul(x, params.wv[h]);
    Tensor logits = scale(matmul(q, transpose(k)), inv_sqrt_dh);
    Tensor weights = softmax_rows(add(logits, mask_bias));
    // Sequential mix so masked columns (exact zero weight) cannot shift
    // the rounding of the open columns' sum.
    heads.push_back(matmul_seq(weights, v));
  }
  Tensor merged = params.n_heads == 1 ? heads[0] : concat_cols(heads);
  return add_row_broadcast(matmul(merged, params.wo), params.bo);
}

Tensor transformer_forward(const Tensor& x, const Tensor& mask_bias,
                           const TransformerParams& params, double ln_eps) {
  if (!params.layers.empty()) {
    const std::size_t e = x.shape()[0];
    if (mask_bias.rank() != 2 || mask_bias.shape()[0] != e ||
        mask_bias.shape()[1] != e) {
      fail("E_SHAPE", "transformer: mask " + shape_str(mask_bias.shape()) +
                          " does not match sequence length " +
                          std::to_string(e));
    }
  }
  Tensor h = x;
  for (const TransformerLayerParams& layer : params.layers) {
    Tensor attn = masked_multihead_attention(h, mask_bias, layer.attn);
    h = layer_norm(add(h, attn), layer.ln1_gamma, layer.ln1_beta, ln_eps);
    Tensor ff = add_row_broadcast(
        matmul(relu(add_row_broadcast(matmul(h, layer.ff_w1), layer.ff_b1)),
               layer.ff_w2),
        layer.ff_b2);
    h = layer_norm(add(h, ff), layer.ln2_gamma, layer.ln2_beta, ln_eps);
  }
  return h;
}

}  // namespace ektvqa::nn
