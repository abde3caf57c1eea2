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
#include <string>

namespace ektvqa::synth {

// Knowledge-discrimination task generator. Every instance asks
// "what <category> is shown" about an image whose OCR tokens are fresh
// random strings; exactly one token's knowledge-base description carries
// the asked category, the distractor tokens carry other categories. Target
// strings are unique within a split and disjoint across splits, and no
// answer string ever appears in the vocabulary, so the answer cannot be
// memorized; it must be read off the token whose knowledge fact matches
// the question. Each candidate set pairs the valid meaning with decoy
// meanings drawn from categories absent from the image, so candidate
// selection is decidable from image context.
struct SyntheticSpec {
  std::size_t n_instances = 600;
  std::size_t n_entity_families = 6;  // categories
  std::size_t vocab_size = 30;
  std::size_t distractors = 3;  // non-answer OCR tokens per image
  double train_ratio = 5.0 / 6.0;
  std::uint64_t seed = 0;
  std::size_t candidates_per_token = 3;  // 1 valid + decoys
  std::size_t decoy_filler_words = 6;    // decoy description padding
  double label_jitter = 0.08;  // relative offset of category-marker boxes
};

struct SyntheticOutput {
  std::string train_path;
  std::string val_path;
  std::string kb_path;
  std::string vocab_path;
  std::size_t n_train = 0;
  std::size_t n_val = 0;
};

// Writes train.jsonl, val.jsonl, kb.jsonl and vocab.txt under out_dir.
// Byte-identical output for identical spec.
SyntheticOutput gen_synthetic(const SyntheticSpec& spec,
                              const std::string& out_dir);

}  // namespace ektvqa::synth
