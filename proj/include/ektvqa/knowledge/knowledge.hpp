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

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ektvqa/features/encoders.hpp"
#include "ektvqa/features/types.hpp"
#include "ektvqa/nn/params.hpp"
#include "ektvqa/nn/tensor.hpp"

namespace ektvqa::knowledge {

// One candidate meaning from a knowledge-base lookup. The embedded text is
// the merged description+attribute; the name is excluded so a candidate
// cannot validate itself through the query string.
struct KnowledgeCandidate {
  std::string name;
  std::string description;
  std::string attribute;
  std::string merged_text;
  std::vector<double> embedding;  // ctx_dim, filled before scoring
};

inline constexpr std::size_t kMaxCandidates = 4;

struct CandidateSet {
  std::string query_token;
  std::vector<KnowledgeCandidate> candidates;  // at most kMaxCandidates
};

// Local snapshot of knowledge-base responses, one record per query token.
// The loader keeps at most `raw_cap` raw candidates per record; lookup
// truncates to kMaxCandidates.
class KBSnapshot {
 public:
  static KBSnapshot load(const std::string& path, std::size_t raw_cap = 10);

  CandidateSet lookup(const std::string& token) const;
  bool contains(const std::string& token) const;
  std::size_t size() const { return entries_.size(); }

  void add(const std::string& query, std::vector<KnowledgeCandidate> cands);
  void save(const std::string& path) const;

 private:
  std::unordered_map<std::string, std::vector<KnowledgeCandidate>> entries_;
};

// Keeps only candidates whose name or description contains the queried
// token as a whole word (case-insensitive); survivors get merged_text.
CandidateSet filter_candidates(const std::string& token, CandidateSet cands);

// Fills candidate embeddings (contextual stub over merged_text).
void embed_candidates(CandidateSet& cands, std::size_t ctx_dim);

// Multiword entity binding: when a candidate name for some token is a
// multiword phrase spelled by consecutive (reading-order) unmerged tokens,
// those tokens fuse into one token carrying the phrase, the union box and
// recomputed text features. Candidate sets move with the tokens; a merged
// token keeps the trigger token's candidates re-filtered against the
// phrase. Merges never overlap.
struct BindResult {
  std::vector<features::OcrToken> tokens;
  std::vector<CandidateSet> cands;  // aligned with tokens
};
BindResult bind_multiword(const std::vector<features::OcrToken>& ocr,
                          const std::vector<CandidateSet>& cands_per_token,
                          const features::FeatureDims& dims,
                          const std::string& image_id);

// Image context: OCR texts, object labels, question words, in that order,
// each with a contextual-stub embedding.
struct ContextBag {
  std::vector<std::string> entries;
  std::vector<std::vector<double>> embeddings;
};
ContextBag build_context(const features::QAInstance& inst,
                         std::size_t ctx_dim);

// Validity-scoring projections, trained jointly with the answer loss.
struct ValidityParams {
  nn::Tensor wa;  // [ctx_dim, hidden]
  nn::Tensor wc;  // [hidden, 1]

  static ValidityParams create(nn::ParamStore& store, std::size_t ctx_dim,
                               std::size_t hidden, Rng& rng);
};

// Softmax validity distribution over the candidate set: each candidate is
// scored by projecting its embedding and the summed context embedding
// through ReLU(Wa .), multiplying elementwise, and reducing with Wc.
// Returns a rank-1 tensor of |candidates| probabilities.
nn::Tensor validity_scores(const CandidateSet& cands, const ContextBag& ctx,
                           const ValidityParams& params);

// Context-validated fact bound to one OCR token. `present` is false when
// no candidate survived the pipeline for that token.
struct KnowledgeFact {
  std::size_t source_token_index = 0;
  std::vector<double> embedding;
  bool present = false;
};

// Highest-scoring candidate wins; ties break toward the lowest index.
std::size_t argmax_index(const std::vector<double>& scores);
KnowledgeFact select_valid(const std::vector<double>& scores,
                           const CandidateSet& cands,
                           std::size_t token_index);

}  // namespace ektvqa::knowledge
