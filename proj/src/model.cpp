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

#include "ektvqa/model/model.hpp"

#include <algorithm>
#include <cmath>

#include "ektvqa/error.hpp"
#include "ektvqa/strings.hpp"

namespace ektvqa::model {

using nn::Tensor;

Variant variant_from_string(const std::string& name) {
  const std::string n = to_lower(name);
  if (n == "ektvqa") return Variant::kEktvqa;
  if (n == "tvqa") return Variant::kTvqa;
  if (n == "ektvqa_unc") return Variant::kUnconstrained;
  if (n == "ektvqa_rnd") return Variant::kRandom;
  if (n == "ektvqa_all") return Variant::kAll;
  if (n == "kbvqa") return Variant::kImageLevel;
  fail("E_CONFIG", "unknown variant: " + name);
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kEktvqa: return "ektvqa";
    case Variant::kTvqa: return "tvqa";
    case Variant::kUnconstrained: return "ektvqa_unc";
    case Variant::kRandom: return "ektvqa_rnd";
    case Variant::kAll: return "ektvqa_all";
    case Variant::kImageLevel: return "kbvqa";
  }
  return "unknown";
}

MaskMode mask_mode_for(Variant v) {
  switch (v) {
    case Variant::kTvqa: return MaskMode::kNoKnowledge;
    case Variant::kUnconstrained: return MaskMode::kUnconstrained;
    case Variant::kImageLevel: return MaskMode::kImageLevel;
    default: return MaskMode::kConstrained;
  }
}

bool variant_uses_knowledge(Variant v) { return v != Variant::kTvqa; }

bool variant_validates(Variant v) {
  return v == Variant::kEktvqa || v == Variant::kUnconstrained;
}

PreparedInstance prepare_instance(features::QAInstance inst,
                                  const knowledge::KBSnapshot* kb,
                                  const ModelConfig& cfg, Rng& policy_rng) {
  features::fill_instance_features(inst, cfg.dims);
  PreparedInstance pi;
  if (variant_uses_knowledge(cfg.variant) && kb != nullptr) {
    std::vector<knowledge::CandidateSet> per_token;
    per_token.reserve(inst.ocr.size());
    for (const features::OcrToken& tok : inst.ocr) {
      per_token.push_back(
          knowledge::filter_candidates(tok.text, kb->lookup(tok.text)));
    }
    knowledge::BindResult bound = knowledge::bind_multiword(
        inst.ocr, per_token, cfg.dims, inst.image_id);
    inst.ocr = std::move(bound.tokens);
    pi.cands = std::move(bound.cands);
    for (knowledge::CandidateSet& cs : pi.cands) {
      knowledge::embed_candidates(cs, cfg.dims.ctx_dim);
    }
  } else {
    pi.cands.resize(inst.ocr.size());
    for (std::size_t i = 0; i < inst.ocr.size(); ++i) {
      pi.cands[i].query_token = inst.ocr[i].text;
    }
  }
  pi.context = knowledge::build_context(inst, cfg.dims.ctx_dim);
  pi.random_choice.resize(inst.ocr.size(), -1);
  for (std::size_t i = 0; i < pi.cands.size(); ++i) {
    if (!pi.cands[i].candidates.empty()) {
      pi.random_choice[i] =
          static_cast<int>(policy_rng.index(pi.cands[i].candidates.size()));
    }
  }
  pi.inst = std::move(inst);
  return pi;
}

Model::Model(ModelConfig cfg, AnswerVocab vocab)
    : cfg_(cfg), vocab_(std::move(vocab)) {
  Rng rng(cfg_.seed);
  const std::size_t d = cfg_.dims.d_model;
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  transformer_ = nn::TransformerParams::create(params_, cfg_.n_layers,
                                               cfg_.n_heads, d, rng);
  enc_ = features::EncoderParams::create(params_, cfg_.dims,
                                         variant_uses_knowledge(cfg_.variant),
                                         rng);
  ptr_.w_voc = params_.create("voc.w",
                              Tensor::uniform({d, vocab_.size()}, rng, bound));
  ptr_.b_voc = params_.create("voc.b", Tensor::zeros({vocab_.size()}, true));
  ptr_.w_prv = params_.create("ptr.w_prv", Tensor::uniform({d, d}, rng, bound));
  ptr_.b_prv = params_.create("ptr.b_prv", Tensor::zeros({d}, true));
  ptr_.w_ocr = params_.create("ptr.w_ocr", Tensor::uniform({d, d}, rng, bound));
  ptr_.b_ocr = params_.create("ptr.b_ocr", Tensor::zeros({d}, true));
  ptr_.bias = params_.create("ptr.bias", Tensor::scalar(0.0, true));
  if (variant_validates(cfg_.variant)) {
    validity_ = knowledge::ValidityParams::create(params_, cfg_.dims.ctx_dim,
                                                  cfg_.validity_hidden, rng);
  }
}

nn::Tensor decode_step(const nn::Tensor& state, const nn::Tensor& zocr,
                       const PointerParams& params) {
  Tensor y_voc = linear(state, params.w_voc, params.b_voc);
  if (!zocr.defined() || zocr.shape()[0] == 0) return y_voc;
  const std::size_t n = zocr.shape()[0];
  const std::size_t d = zocr.shape()[1];
  Tensor query = linear(state, params.w_prv, params.b_prv);
  Tensor ocr_proj = add_row_broadcast(matmul(zocr, params.w_ocr), params.b_ocr);
  Tensor y_ocr = add_scalar(
      reshape(matmul(ocr_proj, reshape(query, {d, 1})), {n}), params.bias);
  return nn::concat_vec({y_voc, y_ocr});
}

Tensor Model::knowledge_row(const PreparedInstance& pi, std::size_t token,
                            std::vector<double>* gate_probs) const {
  const knowledge::CandidateSet& cs = pi.cands[token];
  const std::size_t ctx_dim = cfg_.dims.ctx_dim;
  if (cs.candidates.empty()) {
    return linear(enc_.knw_null, enc_.knw_w);
  }
  switch (cfg_.variant) {
    case Variant::kRandom: {
      const int pick = pi.random_choice[token];
      const auto& emb = cs.candidates[static_cast<std::size_t>(pick)].embedding;
      return linear(Tensor::from({ctx_dim}, emb), enc_.knw_w);
    }
    case Variant::kAll:
    case Variant::kImageLevel: {
      // No validation: aggregate every candidate meaning.
      std::vector<double> sum(ctx_dim, 0.0);
      for (const knowledge::KnowledgeCandidate& c : cs.candidates)
        for (std::size_t i = 0; i < ctx_dim; ++i) sum[i] += c.embedding[i];
      return linear(Tensor::from({ctx_dim}, std::move(sum)), enc_.knw_w);
    }
    default: {
      // Contextual validation: hard argmax selection whose softmax
      // probability gates the row straight-through, keeping the scorer
      // trainable from the answer loss alone.
      Tensor probs = knowledge::validity_scores(cs, pi.context, validity_);
      const std::size_t pick = knowledge::argmax_index(probs.values());
      if (gate_probs) *gate_probs = probs.values();
      Tensor fact = Tensor::from({ctx_dim}, cs.candidates[pick].embedding);
      Tensor gated = st_scale(fact, select_element(probs, pick));
      return linear(gated, enc_.knw_w);
    }
  }
}

Model::Forward Model::forward(
    const PreparedInstance& pi,
    const std::vector<features::PrevChoice>& prev_feeds,
    const AttentionMaskSpec* mask_override) const {
  const features::QAInstance& inst = pi.inst;
  const std::size_t l = inst.question_tokens.size();
  const std::size_t m = inst.objects.size();
  const std::size_t n = inst.ocr.size();
  const std::size_t steps = cfg_.dims.decode_steps;
  const bool knw = variant_uses_knowledge(cfg_.variant);
  if (knw && pi.cands.size() != n) {
    fail("E_CONTRACT", "forward: candidate sets misaligned with OCR tokens");
  }

  std::vector<Tensor> rows;
  rows.reserve(l + m + n + (knw ? n : 0) + steps);
  for (const std::string& w : inst.question_tokens) {
    rows.push_back(
        features::encode_question_word(w, enc_, cfg_.dims, cfg_.ln_eps));
  }
  for (const features::VisualObject& obj : inst.objects) {
    rows.push_back(features::encode_object(obj, enc_, cfg_.ln_eps));
  }
  std::vector<Tensor> ocr_rows;
  ocr_rows.reserve(n);
  for (const features::OcrToken& tok : inst.ocr) {
    ocr_rows.push_back(features::encode_ocr(tok, enc_, cfg_.ln_eps));
    rows.push_back(ocr_rows.back());
  }
  if (knw) {
    for (std::size_t i = 0; i < n; ++i) {
      rows.push_back(knowledge_row(pi, i, nullptr));
    }
  }
  for (std::size_t step = 0; step < steps; ++step) {
    features::PrevChoice feed;  // begin padding beyond provided feeds
    if (step < prev_feeds.size()) feed = prev_feeds[step];
    rows.push_back(features::embed_previous_prediction(
        feed, step, ocr_rows, ptr_.w_voc, vocab_.begin_index(),
        enc_.prev_pos));
  }

  Forward out;
  out.mask = mask_override
                 ? *mask_override
                 : build_attention_mask(l, m, n, steps,
                                        mask_mode_for(cfg_.variant),
                                        cfg_.open_knowledge_context);
  Tensor z = nn::transformer_forward(stack_rows(rows), out.mask.tensor(),
                                     transformer_, cfg_.ln_eps);
  std::size_t offset = 0;
  auto take = [&](std::size_t count) {
    Tensor part = count > 0 ? slice_rows(z, offset, count) : Tensor();
    offset += count;
    return part;
  };
  out.zq = take(l);
  out.zobj = take(m);
  out.zocr = take(n);
  out.zknw = knw ? take(n) : Tensor();
  out.zprv = take(steps);

  std::vector<Tensor> score_rows;
  score_rows.reserve(steps);
  for (std::size_t step = 0; step < steps; ++step) {
    score_rows.push_back(decode_step(select_row(out.zprv, step), out.zocr, ptr_));
  }
  out.step_scores = stack_rows(score_rows);
  return out;
}

std::vector<StepTarget> Model::build_targets(const PreparedInstance& pi,
                                             std::size_t* unmatched) const {
  std::vector<StepTarget> targets;
  if (pi.inst.answers.empty()) return targets;
  const std::vector<std::string> words =
      split_words(normalize_answer(pi.inst.answers.front()));
  const std::size_t h = vocab_.size();
  const auto& ocr = pi.inst.ocr;

  // Greedy longest match against (possibly multiword) OCR token texts.
  std::vector<std::string> pieces;
  std::size_t w = 0;
  while (w < words.size()) {
    std::size_t best_len = 1;
    for (std::size_t len = words.size() - w; len > 1; --len) {
      std::vector<std::string> window(words.begin() + w,
                                      words.begin() + w + len);
      const std::string phrase = join_words(window);
      bool found = false;
      for (const features::OcrToken& t : ocr) {
        if (t.text == phrase) {
          found = true;
          break;
        }
      }
      if (found) {
        best_len = len;
        break;
      }
    }
    std::vector<std::string> window(words.begin() + w,
                                    words.begin() + w + best_len);
    pieces.push_back(join_words(window));
    w += best_len;
  }

  for (const std::string& piece : pieces) {
    if (targets.size() + 1 >= cfg_.dims.decode_steps) break;
    StepTarget t;
    std::optional<std::size_t> voc = vocab_.find(piece);
    if (voc) t.positions.push_back(*voc);
    std::optional<std::size_t> first_ocr;
    for (std::size_t i = 0; i < ocr.size(); ++i) {
      if (ocr[i].text == piece) {
        t.positions.push_back(h + i);
        if (!first_ocr) first_ocr = i;
      }
    }
    if (first_ocr) {
      t.feed = {features::PrevChoice::Kind::kOcr, *first_ocr};
    } else if (voc) {
      t.feed = {features::PrevChoice::Kind::kVocab, *voc};
    } else {
      // Matches neither answer space: this step is masked from the loss.
      if (unmatched) ++*unmatched;
      t.feed = {features::PrevChoice::Kind::kBegin, 0};
    }
    targets.push_back(std::move(t));
  }
  StepTarget end;
  end.positions.push_back(vocab_.end_index());
  end.feed = {features::PrevChoice::Kind::kVocab, vocab_.end_index()};
  targets.push_back(std::move(end));
  return targets;
}

double Model::train_step(const std::vector<PreparedInstance>& batch,
                         nn::AdamOptimizer& opt, std::size_t* unmatched) {
  if (batch.empty()) fail("E_CONTRACT", "train_step: empty batch");
  std::vector<Tensor> losses;
  losses.reserve(batch.size());
  for (const PreparedInstance& pi : batch) {
    const std::vector<StepTarget> targets = build_targets(pi, unmatched);
    std::vector<features::PrevChoice> feeds;
    feeds.push_back({features::PrevChoice::Kind::kBegin, 0});
    for (std::size_t i = 0; i + 1 < targets.size(); ++i) {
      feeds.push_back(targets[i].feed);
    }
    Forward fwd = forward(pi, feeds);
    const std::size_t steps = cfg_.dims.decode_steps;
    const std::size_t width = fwd.step_scores.shape()[1];
    std::vector<double> labels(steps * width, 0.0);
    std::vector<double> row_mask(steps, 0.0);
    for (std::size_t s = 0; s < targets.size() && s < steps; ++s) {
      if (targets[s].positions.empty()) continue;
      row_mask[s] = 1.0;
      for (std::size_t pos : targets[s].positions) labels[s * width + pos] = 1.0;
    }
    losses.push_back(bce_with_logits(fwd.step_scores, labels, row_mask));
  }
  Tensor total = losses.front();
  for (std::size_t i = 1; i < losses.size(); ++i) total = add(total, losses[i]);
  total = scale(total, 1.0 / static_cast<double>(losses.size()));
  if (!all_finite(total)) {
    fail("E_NAN", "train_step: non-finite loss");
  }
  params_.zero_grad();
  nn::backward(total);
  opt.step(params_);
  return total.item();
}

Model::Decoded Model::generate_answer(const PreparedInstance& pi,
                                      std::size_t max_steps) const {
  const std::size_t steps =
      max_steps == 0 ? cfg_.dims.decode_steps
                     : std::min(max_steps, cfg_.dims.decode_steps);
  const std::size_t h = vocab_.size();
  Decoded out;
  std::vector<features::PrevChoice> feeds;
  feeds.push_back({features::PrevChoice::Kind::kBegin, 0});
  std::vector<std::string> answer_words;
  for (std::size_t step = 0; step < steps; ++step) {
    Forward fwd = forward(pi, feeds);
    const std::size_t width = fwd.step_scores.shape()[1];
    std::size_t best = 0;
    for (std::size_t j = 1; j < width; ++j) {
      if (fwd.step_scores.at(step, j) > fwd.step_scores.at(step, best))
        best = j;
    }
    features::PrevChoice choice;
    if (best < h) {
      if (best == vocab_.end_index()) break;
      choice = {features::PrevChoice::Kind::kVocab, best};
      if (best != vocab_.begin_index()) answer_words.push_back(vocab_.word(best));
    } else {
      choice = {features::PrevChoice::Kind::kOcr, best - h};
      answer_words.push_back(pi.inst.ocr[best - h].text);
    }
    out.choices.push_back(choice);
    feeds.push_back(choice);
  }
  out.answer = join_words(answer_words);
  return out;
}

nn::Checkpoint transfer_weights(const nn::Checkpoint& source,
                                const ModelConfig& target_cfg,
                                const AnswerVocab& vocab) {
  Model target(target_cfg, vocab);
  std::size_t shared = 0;
  for (auto& [name, t] : target.params().entries()) {
    auto it = source.tensors.find(name);
    if (it == source.tensors.end()) continue;
    if (it->second.shape() != t.shape()) {
      fail("E_CHECKPOINT", "transfer: shape mismatch for " + name + ": " +
                               nn::shape_str(it->second.shape()) + " vs " +
                               nn::shape_str(t.shape()));
    }
    t.mutable_values() = it->second.values();
    ++shared;
  }
  if (shared == 0) {
    fail("E_CHECKPOINT", "transfer: no shared parameters between variants");
  }
  return nn::Checkpoint::from_store(target.params());
}

}  // namespace ektvqa::model
