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

#include "ektvqa/synth/generator.hpp"

#include <algorithm>
#include <filesystem>
#include <set>
#include <vector>

#include "ektvqa/error.hpp"
#include "ektvqa/features/types.hpp"
#include "ektvqa/io/dataset.hpp"
#include "ektvqa/knowledge/knowledge.hpp"
#include "ektvqa/model/vocab.hpp"
#include "ektvqa/rng.hpp"

namespace ektvqa::synth {

namespace {

const std::vector<std::string> kCategories = {
    "coffee", "phone",  "tractor", "juice",  "camera", "guitar",
    "cereal", "laptop", "soap",    "candy",  "airline", "boots",
    "yogurt", "engine", "piano",   "razor"};

const std::vector<std::string> kFillers = {
    "founded",  "group",   "global",  "tools",   "goods",   "classic",
    "heritage", "quality", "trading", "service", "online",  "regional",
    "supply",   "retail",  "works",   "studio",  "limited", "premium",
    "family",   "modern",  "export",  "network", "union",   "house"};

std::string random_token(Rng& rng, std::set<std::string>& used) {
  for (;;) {
    const std::size_t len = 5 + rng.index(4);
    std::string s;
    for (std::size_t i = 0; i < len; ++i) {
      s.push_back(static_cast<char>('a' + rng.index(26)));
    }
    if (used.count(s)) continue;
    bool clash = false;
    for (const std::string& c : kCategories) clash = clash || c == s;
    for (const std::string& f : kFillers) clash = clash || f == s;
    if (clash) continue;
    used.insert(s);
    return s;
  }
}

std::string title_case(const std::string& s) {
  std::string out = s;
  if (!out.empty()) {
    out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  }
  return out;
}

features::BBox jitter_box(const features::BBox& b, double frac, Rng& rng) {
  features::BBox out = b;
  const double dw = (b.x2 - b.x1) * frac;
  const double dh = (b.y2 - b.y1) * frac;
  out.x1 = std::max(0.0, b.x1 + rng.uniform(-dw, dw));
  out.y1 = std::max(0.0, b.y1 + rng.uniform(-dh, dh));
  out.x2 = std::min(b.image_w, b.x2 + rng.uniform(-dw, dw));
  out.y2 = std::min(b.image_h, b.y2 + rng.uniform(-dh, dh));
  if (!(out.x1 < out.x2) || !(out.y1 < out.y2)) return b;
  return out;
}

}  // namespace

SyntheticOutput gen_synthetic(const SyntheticSpec& spec,
                              const std::string& out_dir) {
  if (spec.n_entity_families < 2 ||
      spec.n_entity_families > kCategories.size()) {
    fail("E_CONFIG", "n_entity_families must be in [2, " +
                         std::to_string(kCategories.size()) + "]");
  }
  if (spec.distractors + 1 > spec.n_entity_families) {
    fail("E_CONFIG", "need more entity families than tokens per image");
  }
  if (spec.candidates_per_token < 1 ||
      spec.candidates_per_token > knowledge::kMaxCandidates) {
    fail("E_CONFIG", "candidates_per_token must be in [1, 4]");
  }

  std::filesystem::create_directories(out_dir);
  Rng rng(spec.seed);
  std::set<std::string> used_tokens;

  const std::vector<std::string> cats(kCategories.begin(),
                                      kCategories.begin() +
                                          spec.n_entity_families);

  std::vector<features::QAInstance> instances;
  knowledge::KBSnapshot kb;
  const double img_w = 640, img_h = 480;

  for (std::size_t i = 0; i < spec.n_instances; ++i) {
    features::QAInstance inst;
    inst.question_id = static_cast<std::int64_t>(i);
    inst.image_id = "synth-" + std::to_string(i);
    inst.image_w = img_w;
    inst.image_h = img_h;

    // Pick the target category plus distinct distractor categories.
    std::vector<std::size_t> cat_idx(cats.size());
    for (std::size_t k = 0; k < cat_idx.size(); ++k) cat_idx[k] = k;
    rng.shuffle(cat_idx);
    const std::size_t n_tokens = spec.distractors + 1;
    std::vector<std::string> image_cats;
    for (std::size_t k = 0; k < n_tokens; ++k)
      image_cats.push_back(cats[cat_idx[k]]);
    const std::size_t target_slot = rng.index(n_tokens);
    const std::string& target_cat = image_cats[target_slot];

    inst.question_tokens = {"what", target_cat, "is", "shown"};

    std::string target_text;
    for (std::size_t k = 0; k < n_tokens; ++k) {
      const std::string text = random_token(rng, used_tokens);
      if (k == target_slot) target_text = text;

      features::OcrToken tok;
      tok.text = text;
      tok.reading_order = k;
      tok.bbox.image_w = img_w;
      tok.bbox.image_h = img_h;
      tok.bbox.x1 = 20.0 + rng.uniform(0.0, 440.0);
      tok.bbox.y1 = 20.0 + rng.uniform(0.0, 380.0);
      tok.bbox.x2 = tok.bbox.x1 + 90.0 + rng.uniform(0.0, 60.0);
      tok.bbox.y2 = tok.bbox.y1 + 28.0 + rng.uniform(0.0, 20.0);
      tok.bbox.x2 = std::min(tok.bbox.x2, img_w);
      tok.bbox.y2 = std::min(tok.bbox.y2, img_h);
      inst.ocr.push_back(tok);

      // Category marker object co-located with its token.
      features::VisualObject obj;
      obj.label = image_cats[k];
      obj.bbox = jitter_box(tok.bbox, spec.label_jitter, rng);
      inst.objects.push_back(std::move(obj));

      // Knowledge entry: one valid meaning naming the true category and
      // decoys from categories absent from this image.
      std::vector<std::string> decoy_pool;
      for (const std::string& c : cats) {
        bool in_image = false;
        for (const std::string& ic : image_cats) in_image = in_image || ic == c;
        if (!in_image) decoy_pool.push_back(c);
      }
      std::vector<knowledge::KnowledgeCandidate> cands;
      knowledge::KnowledgeCandidate valid;
      valid.name = title_case(text);
      valid.description = "a " + image_cats[k] + " company";
      valid.attribute = "organization";
      cands.push_back(std::move(valid));
      for (std::size_t c = 1;
           c < spec.candidates_per_token && !decoy_pool.empty(); ++c) {
        knowledge::KnowledgeCandidate decoy;
        decoy.name = title_case(text);
        decoy.description = "maker of " +
                            decoy_pool[rng.index(decoy_pool.size())] +
                            " products";
        for (std::size_t f = 0; f < spec.decoy_filler_words; ++f) {
          decoy.description += " " + kFillers[rng.index(kFillers.size())];
        }
        decoy.attribute = "organization";
        cands.push_back(std::move(decoy));
      }
      rng.shuffle(cands);
      kb.add(text, std::move(cands));
    }

    // A generic scene object so object lists are never single-purpose.
    features::VisualObject scene;
    scene.label = "scene";
    scene.bbox = {0.0, 0.0, img_w, img_h, img_w, img_h};
    inst.objects.push_back(std::move(scene));

    inst.answers = {target_text};
    instances.push_back(std::move(inst));
  }

  const std::size_t n_train = static_cast<std::size_t>(
      static_cast<double>(spec.n_instances) * spec.train_ratio + 0.5);
  std::vector<features::QAInstance> train(instances.begin(),
                                          instances.begin() + n_train);
  std::vector<features::QAInstance> val(instances.begin() + n_train,
                                        instances.end());

  std::vector<std::string> vocab_words = {"yes", "no", "brand", "company",
                                          "product", "sign"};
  for (const std::string& c : cats) vocab_words.push_back(c);
  for (const std::string& f : kFillers) {
    if (vocab_words.size() >= spec.vocab_size) break;
    vocab_words.push_back(f);
  }
  if (vocab_words.size() > spec.vocab_size) {
    vocab_words.resize(std::max<std::size_t>(spec.vocab_size, cats.size() + 2));
  }

  SyntheticOutput out;
  const std::filesystem::path dir(out_dir);
  out.train_path = (dir / "train.jsonl").string();
  out.val_path = (dir / "val.jsonl").string();
  out.kb_path = (dir / "kb.jsonl").string();
  out.vocab_path = (dir / "vocab.txt").string();
  out.n_train = train.size();
  out.n_val = val.size();
  io::emit_dataset(train, out.train_path);
  io::emit_dataset(val, out.val_path);
  kb.save(out.kb_path);
  model::AnswerVocab::from_words(vocab_words).save(out.vocab_path);
  return out;
}

}  // namespace ektvqa::synth
