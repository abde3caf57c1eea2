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

#include "ektvqa/knowledge/knowledge.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "ektvqa/error.hpp"
#include "ektvqa/features/embed.hpp"
#include "ektvqa/features/phoc.hpp"
#include "ektvqa/strings.hpp"

namespace ektvqa::knowledge {

namespace {

using json = nlohmann::json;

std::string make_merged_text(const KnowledgeCandidate& c) {
  if (c.attribute.empty()) return c.description;
  if (c.description.empty()) return c.attribute;
  return c.description + " " + c.attribute;
}

}  // namespace

KBSnapshot KBSnapshot::load(const std::string& path, std::size_t raw_cap) {
  std::ifstream is(path);
  if (!is) fail("E_IO", "cannot open knowledge snapshot: " + path);
  KBSnapshot kb;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      fail("E_SCHEMA", "knowledge snapshot record " + std::to_string(line_no) +
                           ": " + e.what());
    }
    if (!rec.is_object() || !rec.contains("query") ||
        !rec["query"].is_string() || !rec.contains("candidates") ||
        !rec["candidates"].is_array()) {
      fail("E_SCHEMA", "knowledge snapshot record " + std::to_string(line_no) +
                           ": expected {query, candidates:[...]}");
    }
    const std::string query = to_lower(rec["query"].get<std::string>());
    std::vector<KnowledgeCandidate> cands;
    for (const json& jc : rec["candidates"]) {
      if (cands.size() >= raw_cap) break;
      if (!jc.is_object() || !jc.contains("name") || !jc["name"].is_string()) {
        fail("E_SCHEMA", "knowledge snapshot record " +
                             std::to_string(line_no) +
                             ": candidate missing name");
      }
      KnowledgeCandidate c;
      c.name = jc["name"].get<std::string>();
      c.description = jc.value("description", std::string());
      c.attribute = jc.value("attribute", std::string());
      if (c.name.empty()) {
        fail("E_SCHEMA", "knowledge snapshot record " +
                             std::to_string(line_no) + ": empty name");
      }
      cands.push_back(std::move(c));
    }
    kb.entries_[query] = std::move(cands);
  }
  return kb;
}

CandidateSet KBSnapshot::lookup(const std::string& token) const {
  CandidateSet out;
  out.query_token = to_lower(token);
  auto it = entries_.find(out.query_token);
  if (it == entries_.end()) return out;
  const std::size_t n = std::min(kMaxCandidates, it->second.size());
  out.candidates.assign(it->second.begin(), it->second.begin() + n);
  return out;
}

bool KBSnapshot::contains(const std::string& token) const {
  return entries_.count(to_lower(token)) > 0;
}

void KBSnapshot::add(const std::string& query,
                     std::vector<KnowledgeCandidate> cands) {
  entries_[to_lower(query)] = std::move(cands);
}

void KBSnapshot::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) fail("E_IO", "cannot write knowledge snapshot: " + path);
  std::vector<std::string> keys;
  keys.reserve(entries_.size());
  for (const auto& [k, v] : entries_) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  for (const std::string& k : keys) {
    json rec;
    rec["query"] = k;
    rec["candidates"] = json::array();
    for (const KnowledgeCandidate& c : entries_.at(k)) {
      rec["candidates"].push_back({{"name", c.name},
                                   {"description", c.description},
                                   {"attribute", c.attribute}});
    }
    os << rec.dump() << "\n";
  }
}

CandidateSet filter_candidates(const std::string& token, CandidateSet cands) {
  CandidateSet out;
  out.query_token = to_lower(token);
  for (KnowledgeCandidate& c : cands.candidates) {
    if (contains_whole_word(c.name, out.query_token) ||
        contains_whole_word(c.description, out.query_token)) {
      c.merged_text = make_merged_text(c);
      out.candidates.push_back(std::move(c));
    }
  }
  return out;
}

void embed_candidates(CandidateSet& cands, std::size_t ctx_dim) {
  for (KnowledgeCandidate& c : cands.candidates) {
    if (c.merged_text.empty()) c.merged_text = make_merged_text(c);
    if (c.embedding.size() != ctx_dim) {
      c.embedding = features::stub_text_embed(c.merged_text, ctx_dim,
                                              features::kContextNs);
    }
  }
}

BindResult bind_multiword(const std::vector<features::OcrToken>& ocr,
                          const std::vector<CandidateSet>& cands_per_token,
                          const features::FeatureDims& dims,
                          const std::string& image_id) {
  if (ocr.size() != cands_per_token.size()) {
    fail("E_CONTRACT", "bind_multiword: token/candidate count mismatch");
  }
  const std::size_t n = ocr.size();

  // Phase 1: claim non-overlapping windows. The trigger token may sit
  // anywhere inside its candidate's phrase ("york" binds a preceding
  // "new"), so singles are only decided once every token had its chance.
  struct Merge {
    std::size_t start = 0, len = 0, trigger = 0;
  };
  std::vector<Merge> merges;
  std::vector<bool> taken(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (taken[i]) continue;
    bool bound = false;
    for (const KnowledgeCandidate& cand : cands_per_token[i].candidates) {
      const std::vector<std::string> phrase = split_words(to_lower(cand.name));
      if (phrase.size() < 2) continue;
      for (std::size_t offset = 0; offset < phrase.size() && !bound;
           ++offset) {
        if (phrase[offset] != ocr[i].text) continue;
        if (offset > i || i - offset + phrase.size() > n) continue;
        const std::size_t start = i - offset;
        bool match = true;
        for (std::size_t k = 0; k < phrase.size(); ++k) {
          const std::size_t idx = start + k;
          if (taken[idx] || ocr[idx].text != phrase[k]) {
            match = false;
            break;
          }
          if (k > 0 &&
              ocr[idx].reading_order != ocr[idx - 1].reading_order + 1) {
            match = false;
            break;
          }
        }
        if (!match) continue;
        for (std::size_t k = 0; k < phrase.size(); ++k) taken[start + k] = true;
        merges.push_back({start, phrase.size(), i});
        bound = true;
      }
      if (bound) break;
    }
  }

  // Phase 2: emit in original order, splicing merged windows in place.
  BindResult out;
  std::vector<const Merge*> merge_at(n, nullptr);
  for (const Merge& mg : merges) merge_at[mg.start] = &mg;
  std::size_t i = 0;
  while (i < n) {
    const Merge* mg = merge_at[i];
    if (mg == nullptr) {
      if (!taken[i]) {
        out.tokens.push_back(ocr[i]);
        out.cands.push_back(cands_per_token[i]);
      }
      ++i;
      continue;
    }
    features::OcrToken merged;
    std::vector<std::string> words;
    merged.reading_order = ocr[mg->start].reading_order;
    merged.bbox = ocr[mg->start].bbox;
    std::vector<double> fr_acc;
    for (std::size_t k = 0; k < mg->len; ++k) {
      const features::OcrToken& t = ocr[mg->start + k];
      words.push_back(t.text);
      merged.bbox.x1 = std::min(merged.bbox.x1, t.bbox.x1);
      merged.bbox.y1 = std::min(merged.bbox.y1, t.bbox.y1);
      merged.bbox.x2 = std::max(merged.bbox.x2, t.bbox.x2);
      merged.bbox.y2 = std::max(merged.bbox.y2, t.bbox.y2);
      if (!t.fr_vec.empty()) {
        if (fr_acc.empty()) fr_acc.assign(t.fr_vec.size(), 0.0);
        for (std::size_t z = 0; z < t.fr_vec.size(); ++z)
          fr_acc[z] += t.fr_vec[z] / static_cast<double>(mg->len);
      }
    }
    merged.text = join_words(words);
    merged.fr_vec = std::move(fr_acc);
    merged.ft_vec = features::stub_text_embed(merged.text, dims.ft_dim,
                                              features::kSubwordNs);
    merged.ph_vec = features::phoc_encode(merged.text);
    out.tokens.push_back(std::move(merged));
    // The merged token keeps the trigger candidates that still name the
    // full phrase.
    out.cands.push_back(filter_candidates(out.tokens.back().text,
                                          cands_per_token[mg->trigger]));
    i = mg->start + mg->len;
  }
  (void)image_id;
  return out;
}

ContextBag build_context(const features::QAInstance& inst,
                         std::size_t ctx_dim) {
  ContextBag bag;
  for (const features::OcrToken& t : inst.ocr) bag.entries.push_back(t.text);
  for (const features::VisualObject& o : inst.objects)
    bag.entries.push_back(o.label);
  for (const std::string& w : inst.question_tokens) bag.entries.push_back(w);
  bag.embeddings.reserve(bag.entries.size());
  for (const std::string& e : bag.entries) {
    bag.embeddings.push_back(
        features::stub_text_embed(e, ctx_dim, features::kContextNs));
  }
  return bag;
}

ValidityParams ValidityParams::create(nn::ParamStore& store,
                                      std::size_t ctx_dim, std::size_t hidden,
                                      Rng& rng) {
  ValidityParams p;
  p.wa = store.create(
      "valid.wa",
      nn::Tensor::uniform({ctx_dim, hidden}, rng,
                          1.0 / std::sqrt(static_cast<double>(ctx_dim))));
  // Positive init keeps the untrained score an (arc-cosine-kernel style)
  // similarity between candidate and context, so selection is sensible
  // from the first epoch and training only refines it.
  p.wc = store.create(
      "valid.wc",
      nn::Tensor::uniform({hidden, 1}, rng, 0.0,
                          1.0 / std::sqrt(static_cast<double>(hidden)), true));
  return p;
}

nn::Tensor validity_scores(const CandidateSet& cands, const ContextBag& ctx,
                           const ValidityParams& params) {
  using nn::Tensor;
  if (cands.candidates.empty()) {
    fail("E_CONTRACT", "validity_scores: empty candidate set");
  }
  if (ctx.embeddings.empty()) {
    fail("E_CONTRACT", "validity_scores: empty context");
  }
  const std::size_t ctx_dim = params.wa.shape()[0];
  std::vector<double> ctx_sum(ctx_dim, 0.0);
  for (const std::vector<double>& e : ctx.embeddings) {
    if (e.size() != ctx_dim) {
      fail("E_SHAPE", "validity_scores: context embedding width mismatch");
    }
    for (std::size_t i = 0; i < ctx_dim; ++i) ctx_sum[i] += e[i];
  }
  Tensor ctx_proj =
      relu(linear(Tensor::from({ctx_dim}, std::move(ctx_sum)), params.wa));
  std::vector<Tensor> scores;
  scores.reserve(cands.candidates.size());
  for (const KnowledgeCandidate& c : cands.candidates) {
    if (c.embedding.size() != ctx_dim) {
      fail("E_CONTRACT",
           "validity_scores: candidate '" + c.name + "' not embedded");
    }
    Tensor cand_proj =
        relu(linear(Tensor::from({ctx_dim}, c.embedding), params.wa));
    scores.push_back(linear(mul(cand_proj, ctx_proj), params.wc));  // [1]
  }
  Tensor raw = reshape(concat_vec(scores), {1, scores.size()});
  return reshape(softmax_rows(raw), {scores.size()});
}

std::size_t argmax_index(const std::vector<double>& scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

KnowledgeFact select_valid(const std::vector<double>& scores,
                           const CandidateSet& cands,
                           std::size_t token_index) {
  if (scores.size() != cands.candidates.size()) {
    fail("E_CONTRACT", "select_valid: score/candidate count mismatch");
  }
  KnowledgeFact fact;
  fact.source_token_index = token_index;
  if (cands.candidates.empty()) return fact;
  const std::size_t d = argmax_index(scores);
  fact.embedding = cands.candidates[d].embedding;
  fact.present = true;
  return fact;
}

}  // namespace ektvqa::knowledge
