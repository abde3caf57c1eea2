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
#include <optional>
#include <string>
#include <vector>

#include "ektvqa/features/encoders.hpp"
#include "ektvqa/features/types.hpp"
#include "ektvqa/knowledge/knowledge.hpp"
#include "ektvqa/model/mask.hpp"
#include "ektvqa/model/vocab.hpp"
#include "ektvqa/nn/optim.hpp"
#include "ektvqa/nn/params.hpp"
#include "ektvqa/nn/transformer.hpp"

namespace ektvqa::model {

// Model variants. The variant pins the mask mode and the fact-selection
// policy together:
//   ektvqa        - contextual validation, constrained mask
//   tvqa          - no knowledge channel at all
//   ektvqa_unc    - contextual validation, all-zero mask
//   ektvqa_rnd    - uniformly random candidate, constrained mask
//   ektvqa_all    - sum of all candidate embeddings, constrained mask
//   kbvqa         - aggregated facts as free rows (image-level ablation)
enum class Variant { kEktvqa, kTvqa, kUnconstrained, kRandom, kAll, kImageLevel };

Variant variant_from_string(const std::string& name);
std::string variant_name(Variant v);
MaskMode mask_mode_for(Variant v);
bool variant_uses_knowledge(Variant v);
bool variant_validates(Variant v);

struct ModelConfig {
  features::FeatureDims dims;
  std::size_t n_heads = 8;
  std::size_t n_layers = 4;
  std::size_t validity_hidden = 256;
  double ln_eps = 1e-6;
  Variant variant = Variant::kEktvqa;
  std::uint64_t seed = 0;
  bool open_knowledge_context = false;
};

// Answer-scoring head. Vocabulary scores are a linear readout of the
// decoding state; OCR scores come from a bilinear interaction between the
// state and each OCR output, with per-side linear maps and a scalar bias.
struct PointerParams {
  nn::Tensor w_voc, b_voc;    // [d, H], [H]
  nn::Tensor w_prv, b_prv;    // [d, d], [d]
  nn::Tensor w_ocr, b_ocr;    // [d, d], [d]
  nn::Tensor bias;            // scalar
};

// Concatenated [vocabulary | OCR] scores for one decoding state. With no
// OCR tokens (zocr undefined or empty) the answer space is the vocabulary
// alone and the result has length H.
nn::Tensor decode_step(const nn::Tensor& state, const nn::Tensor& zocr,
                       const PointerParams& params);

// An instance after feature filling and the knowledge pipeline: multiword
// entities bound, candidates filtered and embedded, context assembled, and
// the random-policy choice frozen per token (so runs are reproducible).
struct PreparedInstance {
  features::QAInstance inst;
  std::vector<knowledge::CandidateSet> cands;  // aligned with inst.ocr
  knowledge::ContextBag context;
  std::vector<int> random_choice;  // -1 where no candidates
};

PreparedInstance prepare_instance(features::QAInstance inst,
                                  const knowledge::KBSnapshot* kb,
                                  const ModelConfig& cfg, Rng& policy_rng);

// One teacher-forcing step: label positions over the concatenated
// [vocabulary | OCR] score vector, plus the input fed to the next row.
struct StepTarget {
  std::vector<std::size_t> positions;  // empty = unmatched, masked from loss
  features::PrevChoice feed;
};

class Model {
 public:
  Model(ModelConfig cfg, AnswerVocab vocab);

  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  const AnswerVocab& vocab() const { return vocab_; }
  const ModelConfig& config() const { return cfg_; }

  struct Forward {
    nn::Tensor zq, zobj, zocr, zknw, zprv;
    nn::Tensor step_scores;  // [D, H+N]
    AttentionMaskSpec mask;
  };

  // Full teacher-forced pass: every decode row is present, later rows are
  // causally invisible to earlier scores. `prev_feeds[d]` is the input for
  // row d (row 0 is always the begin marker; missing entries pad as begin).
  // `mask_override` substitutes the attention bias (structural tests).
  Forward forward(const PreparedInstance& pi,
                  const std::vector<features::PrevChoice>& prev_feeds,
                  const AttentionMaskSpec* mask_override = nullptr) const;

  // Ground-truth decomposition for teacher forcing. Counts answer words
  // that match neither the vocabulary nor any OCR token in `unmatched`.
  std::vector<StepTarget> build_targets(const PreparedInstance& pi,
                                        std::size_t* unmatched = nullptr) const;

  // Teacher-forced multi-label BCE over the concatenated scores, averaged
  // over the batch; applies one optimizer step. Returns the loss value.
  double train_step(const std::vector<PreparedInstance>& batch,
                    nn::AdamOptimizer& opt, std::size_t* unmatched = nullptr);

  struct Decoded {
    std::string answer;
    std::vector<features::PrevChoice> choices;
  };
  // Greedy stepwise decoding, at most config decode steps, stopping at the
  // end marker.
  Decoded generate_answer(const PreparedInstance& pi,
                          std::size_t max_steps = 0) const;

  const PointerParams& pointer() const { return ptr_; }

 private:
  nn::Tensor knowledge_row(const PreparedInstance& pi, std::size_t token,
                           std::vector<double>* gate_probs) const;

  ModelConfig cfg_;
  AnswerVocab vocab_;
  nn::ParamStore params_;
  nn::TransformerParams transformer_;
  features::EncoderParams enc_;
  knowledge::ValidityParams validity_;
  PointerParams ptr_;
};

// Weight transfer between variants: shared parameters are copied from the
// source checkpoint; parameters only present in the target stay at their
// fresh seeded initialization; parameters only present in the source are
// dropped. Fails if the variants share nothing.
nn::Checkpoint transfer_weights(const nn::Checkpoint& source,
                                const ModelConfig& target_cfg,
                                const AnswerVocab& vocab);

}  // namespace ektvqa::model
