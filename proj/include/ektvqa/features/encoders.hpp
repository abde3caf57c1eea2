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

#include "ektvqa/features/types.hpp"
#include "ektvqa/nn/params.hpp"
#include "ektvqa/nn/tensor.hpp"

namespace ektvqa::features {

struct FeatureDims {
  std::size_t d_model = 768;
  std::size_t ctx_dim = 768;  // contextual embedder width
  std::size_t ft_dim = 300;   // subword embedding width
  std::size_t fr_dim = 2048;  // region appearance width
  std::size_t phoc_dim = 604;
  std::size_t decode_steps = 12;
};

// Input-side projections. The object encoder combines a projected
// appearance vector and a projected box through two layer norms; the OCR
// encoder sums projected subword/appearance/phoc content inside one layer
// norm and adds a second for the box. Question words and knowledge facts
// are contextual-embedder vectors pushed through their own projections;
// the knowledge path deliberately has no layer norm so a scalar validity
// gate on the fact survives into the transformer (see model/).
struct EncoderParams {
  nn::Tensor q_w, q_ln_g, q_ln_b;
  nn::Tensor obj_w_fr, obj_w_b;
  nn::Tensor obj_ln1_g, obj_ln1_b, obj_ln2_g, obj_ln2_b;
  nn::Tensor ocr_w_ft, ocr_w_fr, ocr_w_ph, ocr_w_b;
  nn::Tensor ocr_ln1_g, ocr_ln1_b, ocr_ln2_g, ocr_ln2_b;
  nn::Tensor knw_w;     // knowledge modes only
  nn::Tensor knw_null;  // learned embedding for tokens without a fact
  nn::Tensor prev_pos;  // [decode_steps, d_model] step-position table

  static EncoderParams create(nn::ParamStore& store, const FeatureDims& dims,
                              bool with_knowledge, Rng& rng);
};

// Fill stub feature vectors for anything not already provided (e.g. by a
// precomputed-feature file). Object appearance is class-dominant with an
// instance-specific component; OCR appearance is instance noise.
void fill_object_features(VisualObject& obj, const FeatureDims& dims,
                          const std::string& image_id);
void fill_ocr_features(OcrToken& tok, const FeatureDims& dims,
                       const std::string& image_id);
void fill_instance_features(QAInstance& inst, const FeatureDims& dims);

nn::Tensor encode_question_word(const std::string& word,
                                const EncoderParams& p,
                                const FeatureDims& dims, double ln_eps);
nn::Tensor encode_object(const VisualObject& obj, const EncoderParams& p,
                         double ln_eps);
nn::Tensor encode_ocr(const OcrToken& tok, const EncoderParams& p,
                      double ln_eps);

// One decoding-history entry.
struct PrevChoice {
  enum class Kind { kBegin, kOcr, kVocab };
  Kind kind = Kind::kBegin;
  std::size_t index = 0;
};

// Input row for decoding step `step`: the previous choice's OCR feature
// row or vocabulary column (the begin column at step 0), plus the learned
// step-position embedding.
nn::Tensor embed_previous_prediction(const PrevChoice& prev, std::size_t step,
                                     const std::vector<nn::Tensor>& ocr_rows,
                                     const nn::Tensor& w_voc,
                                     std::size_t begin_index,
                                     const nn::Tensor& prev_pos);

}  // namespace ektvqa::features
