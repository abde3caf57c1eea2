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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "ektvqa/io/dataset.hpp"
#include "ektvqa/knowledge/knowledge.hpp"
#include "ektvqa/model/vocab.hpp"
#include "ektvqa/strings.hpp"
#include "ektvqa/synth/generator.hpp"

using namespace ektvqa;
using namespace ektvqa::synth;

namespace {

namespace fs = std::filesystem;

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(is)),
                     std::istreambuf_iterator<char>());
}

SyntheticSpec small_spec() {
  SyntheticSpec spec;
  spec.n_instances = 24;
  spec.n_entity_families = 6;
  spec.vocab_size = 20;
  spec.distractors = 2;
  spec.train_ratio = 0.75;
  spec.seed = 42;
  spec.candidates_per_token = 3;
  return spec;
}

}  // namespace

TEST_CASE("answers are OCR tokens and never vocabulary words") {
  const fs::path dir = fs::temp_directory_path() / "ektvqa_synth_a";
  fs::remove_all(dir);
  const SyntheticOutput out = gen_synthetic(small_spec(), dir.string());
  CHECK(out.n_train == 18);
  CHECK(out.n_val == 6);

  const model::AnswerVocab vocab = model::AnswerVocab::load(out.vocab_path);
  for (const std::string& split : {out.train_path, out.val_path}) {
    for (const features::QAInstance& inst : io::ingest_dataset(split, {})) {
      REQUIRE(inst.answers.size() == 1);
      bool in_ocr = false;
      for (const features::OcrToken& t : inst.ocr)
        in_ocr = in_ocr || t.text == inst.answers[0];
      CHECK(in_ocr);
      CHECK_FALSE(vocab.find(inst.answers[0]).has_value());
    }
  }
}

TEST_CASE("fixed seed reproduces byte-identical files") {
  const fs::path d1 = fs::temp_directory_path() / "ektvqa_synth_b1";
  const fs::path d2 = fs::temp_directory_path() / "ektvqa_synth_b2";
  fs::remove_all(d1);
  fs::remove_all(d2);
  const SyntheticOutput o1 = gen_synthetic(small_spec(), d1.string());
  const SyntheticOutput o2 = gen_synthetic(small_spec(), d2.string());
  CHECK(slurp(o1.train_path) == slurp(o2.train_path));
  CHECK(slurp(o1.val_path) == slurp(o2.val_path));
  CHECK(slurp(o1.kb_path) == slurp(o2.kb_path));
  CHECK(slurp(o1.vocab_path) == slurp(o2.vocab_path));
  CHECK(!slurp(o1.kb_path).empty());
}

TEST_CASE("val targets are disjoint from train targets") {
  const fs::path dir = fs::temp_directory_path() / "ektvqa_synth_c";
  fs::remove_all(dir);
  const SyntheticOutput out = gen_synthetic(small_spec(), dir.string());
  std::set<std::string> train_targets, val_targets;
  for (const auto& inst : io::ingest_dataset(out.train_path, {}))
    train_targets.insert(inst.answers[0]);
  for (const auto& inst : io::ingest_dataset(out.val_path, {}))
    val_targets.insert(inst.answers[0]);
  for (const std::string& t : val_targets) {
    CHECK(train_targets.count(t) == 0);
  }
  // Unique within each split too.
  CHECK(train_targets.size() == 18);
  CHECK(val_targets.size() == 6);
}

TEST_CASE("exactly one token per image matches the question category") {
  const fs::path dir = fs::temp_directory_path() / "ektvqa_synth_d";
  fs::remove_all(dir);
  const SyntheticOutput out = gen_synthetic(small_spec(), dir.string());
  const knowledge::KBSnapshot kb = knowledge::KBSnapshot::load(out.kb_path);

  for (const std::string& split : {out.train_path, out.val_path}) {
    for (const features::QAInstance& inst : io::ingest_dataset(split, {})) {
      REQUIRE(inst.question_tokens.size() == 4);
      const std::string category = inst.question_tokens[1];
      std::size_t matching_tokens = 0;
      for (const features::OcrToken& tok : inst.ocr) {
        const knowledge::CandidateSet cs = kb.lookup(tok.text);
        CHECK(cs.candidates.size() <= knowledge::kMaxCandidates);
        std::size_t matching_cands = 0;
        for (const auto& c : cs.candidates) {
          if (contains_whole_word(c.description, category)) ++matching_cands;
        }
        if (matching_cands > 0) {
          ++matching_tokens;
          CHECK(tok.text == inst.answers[0]);
          // The valid meaning is unique within the candidate set.
          CHECK(matching_cands == 1);
        }
      }
      CHECK(matching_tokens == 1);
    }
  }
}
