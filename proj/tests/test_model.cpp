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

#include <cmath>

#include "ektvqa/error.hpp"
#include "ektvqa/model/model.hpp"
#include "ektvqa/nn/optim.hpp"

using namespace ektvqa;
using namespace ektvqa::model;

namespace {

ModelConfig tiny_config(Variant variant, std::size_t layers = 2,
                        std::uint64_t seed = 5) {
  ModelConfig cfg;
  cfg.dims.d_model = 16;
  cfg.dims.ctx_dim = 24;
  cfg.dims.ft_dim = 8;
  cfg.dims.fr_dim = 8;
  cfg.dims.decode_steps = 5;
  cfg.n_heads = 2;
  cfg.n_layers = layers;
  cfg.validity_hidden = 12;
  cfg.variant = variant;
  cfg.seed = seed;
  return cfg;
}

AnswerVocab tiny_vocab() {
  return AnswerVocab::from_words({"yes", "no", "coffee", "phone"});
}

features::QAInstance tiny_instance() {
  features::QAInstance inst;
  inst.question_id = 1;
  inst.image_id = "img";
  inst.image_w = 100;
  inst.image_h = 100;
  inst.question_tokens = {"what", "coffee", "is", "shown"};
  features::VisualObject obj;
  obj.label = "coffee";
  obj.bbox = {5, 5, 40, 30, 100, 100};
  inst.objects = {obj};
  for (int i = 0; i < 3; ++i) {
    features::OcrToken tok;
    tok.text = std::string("tok") + static_cast<char>('a' + i);
    tok.reading_order = static_cast<std::size_t>(i);
    tok.bbox = {5.0 + i * 30, 50, 25.0 + i * 30, 70, 100, 100};
    inst.ocr.push_back(tok);
  }
  inst.answers = {"tokb"};
  return inst;
}

knowledge::KBSnapshot tiny_kb() {
  knowledge::KBSnapshot kb;
  auto entry = [&](const std::string& token, const std::string& good_cat,
                   const std::string& bad_cat) {
    knowledge::KnowledgeCandidate good;
    good.name = token;
    good.description = "a " + good_cat + " company";
    knowledge::KnowledgeCandidate bad;
    bad.name = token;
    bad.description = "maker of " + bad_cat + " products";
    kb.add(token, {good, bad});
  };
  entry("toka", "phone", "tractor");
  entry("tokb", "coffee", "cereal");
  entry("tokc", "juice", "camera");
  return kb;
}

PreparedInstance prepare(const ModelConfig& cfg,
                         const knowledge::KBSnapshot* kb,
                         std::uint64_t policy_seed = 77) {
  Rng rng(policy_seed);
  return prepare_instance(tiny_instance(), kb, cfg, rng);
}

}  // namespace

TEST_CASE("forward splits blocks by the declared sizes") {
  ModelConfig cfg = tiny_config(Variant::kEktvqa);
  Model m(cfg, tiny_vocab());
  knowledge::KBSnapshot kb = tiny_kb();
  PreparedInstance pi = prepare(cfg, &kb);

  Model::Forward fwd = m.forward(pi, {});
  CHECK(fwd.zq.shape() == nn::Shape{4, 16});
  CHECK(fwd.zobj.shape() == nn::Shape{1, 16});
  CHECK(fwd.zocr.shape() == nn::Shape{3, 16});
  CHECK(fwd.zknw.shape() == nn::Shape{3, 16});
  CHECK(fwd.zprv.shape() == nn::Shape{5, 16});
  CHECK(fwd.step_scores.shape() ==
        nn::Shape{5, m.vocab().size() + 3});
  CHECK(fwd.mask.e() == 4 + 1 + 3 + 3 + 5);
  CHECK(nn::all_finite(fwd.step_scores));
}

TEST_CASE("no-knowledge variant removes rows rather than zeroing them") {
  ModelConfig cfg = tiny_config(Variant::kTvqa);
  Model m(cfg, tiny_vocab());
  PreparedInstance pi = prepare(cfg, nullptr);
  Model::Forward fwd = m.forward(pi, {});
  CHECK_FALSE(fwd.zknw.defined());
  CHECK(fwd.mask.e() == 4 + 1 + 3 + 5);
  CHECK_FALSE(m.params().has("enc.knw.w"));
}

TEST_CASE("decode_step covers the degenerate and bilinear cases") {
  const std::size_t d = 4, h = 3;
  PointerParams p;
  p.w_voc = nn::Tensor::zeros({d, h});
  p.b_voc = nn::Tensor::zeros({h});
  std::vector<double> eye(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) eye[i * d + i] = 1.0;
  p.w_prv = nn::Tensor::from({d, d}, eye);
  p.b_prv = nn::Tensor::zeros({d});
  p.w_ocr = nn::Tensor::from({d, d}, eye);
  p.b_ocr = nn::Tensor::zeros({d});
  p.bias = nn::Tensor::scalar(0.0);

  // No OCR tokens: the answer space is the vocabulary alone.
  nn::Tensor state = nn::Tensor::from({d}, {1, 0, 0, 0});
  CHECK(decode_step(state, nn::Tensor(), p).size() == h);

  // Identity side maps: the state picks the aligned OCR output.
  nn::Tensor zocr = nn::Tensor::from(
      {3, d}, {0, 1, 0, 0,
               0, 0, 1, 0,
               2, 0, 0, 0});
  nn::Tensor scores = decode_step(state, zocr, p);
  REQUIRE(scores.size() == h + 3);
  CHECK(scores.at(h + 0) == doctest::Approx(0.0));
  CHECK(scores.at(h + 1) == doctest::Approx(0.0));
  CHECK(scores.at(h + 2) == doctest::Approx(2.0));

  // Permuting the OCR outputs permutes the OCR scores identically.
  nn::Tensor permuted = nn::Tensor::from(
      {3, d}, {2, 0, 0, 0,
               0, 1, 0, 0,
               0, 0, 1, 0});
  nn::Tensor pscores = decode_step(state, permuted, p);
  CHECK(pscores.at(h + 0) == doctest::Approx(scores.at(h + 2)));
  CHECK(pscores.at(h + 1) == doctest::Approx(scores.at(h + 0)));
  CHECK(pscores.at(h + 2) == doctest::Approx(scores.at(h + 1)));
}

TEST_CASE("model-level pointer scores are permutation-equivariant") {
  ModelConfig cfg = tiny_config(Variant::kEktvqa);
  Model m(cfg, tiny_vocab());
  knowledge::KBSnapshot kb = tiny_kb();
  PreparedInstance pi = prepare(cfg, &kb);

  PreparedInstance rotated = pi;
  // Rotate tokens and their aligned knowledge state left by one.
  std::rotate(rotated.inst.ocr.begin(), rotated.inst.ocr.begin() + 1,
              rotated.inst.ocr.end());
  std::rotate(rotated.cands.begin(), rotated.cands.begin() + 1,
              rotated.cands.end());
  std::rotate(rotated.random_choice.begin(), rotated.random_choice.begin() + 1,
              rotated.random_choice.end());
  rotated.context = knowledge::build_context(rotated.inst, cfg.dims.ctx_dim);

  const std::size_t h = m.vocab().size();
  nn::Tensor base = m.forward(pi, {}).step_scores;
  nn::Tensor perm = m.forward(rotated, {}).step_scores;
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(perm.at(0, h + j) ==
          doctest::Approx(base.at(0, h + (j + 1) % 3)).epsilon(1e-9));
  }
}

TEST_CASE("causality: later feeds cannot move earlier scores") {
  ModelConfig cfg = tiny_config(Variant::kEktvqa);
  Model m(cfg, tiny_vocab());
  knowledge::KBSnapshot kb = tiny_kb();
  PreparedInstance pi = prepare(cfg, &kb);

  std::vector<features::PrevChoice> clean = {
      {features::PrevChoice::Kind::kBegin, 0},
      {features::PrevChoice::Kind::kOcr, 1},
      {features::PrevChoice::Kind::kVocab, 2},
      {features::PrevChoice::Kind::kVocab, 3},
      {features::PrevChoice::Kind::kOcr, 0}};
  nn::Tensor base = m.forward(pi, clean).step_scores;

  for (std::size_t corrupt_at = 1; corrupt_at < 5; ++corrupt_at) {
    std::vector<features::PrevChoice> corrupted = clean;
    for (std::size_t s = corrupt_at; s < corrupted.size(); ++s) {
      corrupted[s] = {features::PrevChoice::Kind::kOcr, (s * 2 + 1) % 3};
    }
    nn::Tensor moved = m.forward(pi, corrupted).step_scores;
    const std::size_t width = base.shape()[1];
    for (std::size_t s = 0; s < corrupt_at; ++s) {
      for (std::size_t j = 0; j < width; ++j) {
        CHECK(moved.at(s, j) == base.at(s, j));  // exact
      }
    }
  }
}

TEST_CASE("single-layer legitimacy: a fact only reaches its own token") {
  ModelConfig cfg = tiny_config(Variant::kEktvqa, /*layers=*/1);
  Model m(cfg, tiny_vocab());
  knowledge::KBSnapshot kb = tiny_kb();
  PreparedInstance pi = prepare(cfg, &kb);

  nn::Tensor base = m.forward(pi, {}).zocr;
  for (std::size_t j = 0; j < 3; ++j) {
    PreparedInstance poked = pi;
    for (auto& cand : poked.cands[j].candidates) {
      for (double& v : cand.embedding) v += 0.25;
    }
    nn::Tensor moved = m.forward(poked, {}).zocr;
    bool own_changed = false;
    for (std::size_t col = 0; col < 16; ++col) {
      own_changed = own_changed || moved.at(j, col) != base.at(j, col);
      for (std::size_t n = 0; n < 3; ++n) {
        if (n != j) CHECK(moved.at(n, col) == base.at(n, col));
      }
    }
    CHECK(own_changed);
  }
}

TEST_CASE("isolated null knowledge equals the no-knowledge variant") {
  // Same shared weights via transfer, facts forced to the null embedding
  // (empty KB), knowledge coupling closed: OCR/question/prediction outputs
  // must match the knowledge-free architecture exactly.
  ModelConfig cfg_e = tiny_config(Variant::kEktvqa);
  ModelConfig cfg_t = tiny_config(Variant::kTvqa);
  Model me(cfg_e, tiny_vocab());

  nn::Checkpoint source = nn::Checkpoint::from_store(me.params());
  Model mt(cfg_t, tiny_vocab());
  transfer_weights(source, cfg_t, tiny_vocab()).apply_to(mt.params());

  knowledge::KBSnapshot empty_kb;
  PreparedInstance pi_e = prepare(cfg_e, &empty_kb);
  PreparedInstance pi_t = prepare(cfg_t, nullptr);

  // Constrained mask with the knowledge coupling closed entirely.
  AttentionMaskSpec isolated = build_attention_mask(
      4, 1, 3, cfg_e.dims.decode_steps, MaskMode::kConstrained);
  const std::size_t e = isolated.e();
  const std::size_t knw0 = 4 + 1 + 3;
  for (std::size_t i = 0; i < e; ++i) {
    for (std::size_t k = 0; k < 3; ++k) {
      if (i != knw0 + k) {
        isolated.matrix[i * e + (knw0 + k)] = nn::kMaskOff;  // column closed
      }
    }
  }
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t j = 0; j < e; ++j) {
      if (j != knw0 + k) isolated.matrix[(knw0 + k) * e + j] = nn::kMaskOff;
    }
  }

  Model::Forward fe = me.forward(pi_e, {}, &isolated);
  Model::Forward ft = mt.forward(pi_t, {});
  REQUIRE(fe.zocr.shape() == ft.zocr.shape());
  for (std::size_t i = 0; i < fe.zocr.size(); ++i) {
    CHECK(fe.zocr.values()[i] == ft.zocr.values()[i]);
  }
  for (std::size_t i = 0; i < fe.zq.size(); ++i) {
    CHECK(fe.zq.values()[i] == ft.zq.values()[i]);
  }
  for (std::size_t i = 0; i < fe.step_scores.size(); ++i) {
    CHECK(fe.step_scores.values()[i] == ft.step_scores.values()[i]);
  }
}

TEST_CASE("build_targets marks both answer spaces and masks unmatched words") {
  ModelConfig cfg = tiny_config(Variant::kEktvqa);
  Model m(cfg, tiny_vocab());
  knowledge::KBSnapshot kb = tiny_kb();
  PreparedInstance pi = prepare(cfg, &kb);

  // "coffee" lives in the vocabulary; "tokb" is an OCR token; answer also
  // exercises an unmatched word.
  pi.inst.answers = {"coffee tokb mystery"};
  std::size_t unmatched = 0;
  const std::vector<StepTarget> targets = m.build_targets(pi, &unmatched);
  REQUIRE(targets.size() == 4);  // three words + end marker
  CHECK(unmatched == 1);

  const std::size_t h = m.vocab().size();
  CHECK(targets[0].positions ==
        std::vector<std::size_t>{m.vocab().find("coffee").value()});
  CHECK(targets[1].positions == std::vector<std::size_t>{h + 1});
  CHECK(targets[2].positions.empty());
  CHECK(targets[3].positions ==
        std::vector<std::size_t>{m.vocab().end_index()});

  // A word present in both spaces labels both positions.
  PreparedInstance both = pi;
  both.inst.ocr[0].text = "coffee";
  both.inst.answers = {"coffee"};
  const std::vector<StepTarget> dual = m.build_targets(both, nullptr);
  REQUIRE(dual.size() == 2);
  CHECK(dual[0].positions ==
        std::vector<std::size_t>{m.vocab().find("coffee").value(), h + 0});
  // OCR feeds take precedence for the next-step input.
  CHECK(dual[0].feed.kind == features::PrevChoice::Kind::kOcr);
}

TEST_CASE("multiword bound entities decode as the full phrase") {
  ModelConfig cfg = tiny_config(Variant::kEktvqa);
  Model m(cfg, tiny_vocab());

  knowledge::KBSnapshot kb;
  knowledge::KnowledgeCandidate c;
  c.name = "Voll Damm";
  c.description = "voll damm is a beer brand";
  kb.add("voll", {c});
  kb.add("damm", {c});

  features::QAInstance inst = tiny_instance();
  inst.ocr[0].text = "voll";
  inst.ocr[1].text = "damm";
  inst.answers = {"voll damm"};
  Rng rng(3);
  PreparedInstance pi = prepare_instance(inst, &kb, cfg, rng);
  REQUIRE(pi.inst.ocr.size() == 2);  // bound pair + tokc
  CHECK(pi.inst.ocr[0].text == "voll damm");

  const std::vector<StepTarget> targets = m.build_targets(pi, nullptr);
  REQUIRE(targets.size() == 2);
  CHECK(targets[0].positions ==
        std::vector<std::size_t>{m.vocab().size() + 0});

  // The decoded answer emits the whole phrase for one pointer choice.
  Model::Decoded dec;
  dec = m.generate_answer(pi, 1);
  if (!dec.choices.empty() &&
      dec.choices[0].kind == features::PrevChoice::Kind::kOcr &&
      dec.choices[0].index == 0) {
    CHECK(dec.answer == "voll damm");
  }
}

TEST_CASE("decoding terminates within the step budget") {
  ModelConfig cfg = tiny_config(Variant::kEktvqa);
  Model m(cfg, tiny_vocab());
  knowledge::KBSnapshot kb = tiny_kb();
  PreparedInstance pi = prepare(cfg, &kb);
  const Model::Decoded dec = m.generate_answer(pi);
  CHECK(dec.choices.size() <= cfg.dims.decode_steps);
}

TEST_CASE("train_step: empty answers reduce to the end marker and stay finite") {
  ModelConfig cfg = tiny_config(Variant::kEktvqa);
  Model m(cfg, tiny_vocab());
  knowledge::KBSnapshot kb = tiny_kb();
  PreparedInstance pi = prepare(cfg, &kb);
  pi.inst.answers = {""};
  nn::AdamOptimizer opt(1e-3);
  const double loss = m.train_step({pi}, opt);
  CHECK(std::isfinite(loss));
  CHECK(opt.step_count() == 1);
}

TEST_CASE("training overfits a small set of instances") {
  ModelConfig cfg = tiny_config(Variant::kEktvqa, 2, 11);
  cfg.dims.d_model = 32;
  cfg.dims.ctx_dim = 32;
  cfg.n_heads = 4;
  Model m(cfg, tiny_vocab());
  knowledge::KBSnapshot kb = tiny_kb();

  std::vector<PreparedInstance> data;
  Rng rng(123);
  for (int i = 0; i < 8; ++i) {
    features::QAInstance inst = tiny_instance();
    inst.question_id = i;
    inst.image_id = "img" + std::to_string(i);
    const std::size_t target = rng.index(3);
    inst.answers = {inst.ocr[target].text};
    inst.question_tokens[1] = (target == 0)   ? "phone"
                              : (target == 1) ? "coffee"
                                              : "juice";
    data.push_back(prepare_instance(inst, &kb, cfg, rng));
  }

  nn::AdamOptimizer opt(3e-3);
  double first_epoch = 0, last_epoch = 0;
  for (int epoch = 0; epoch < 60; ++epoch) {
    double total = 0;
    for (std::size_t start = 0; start < data.size(); start += 4) {
      std::vector<PreparedInstance> batch(
          data.begin() + start,
          data.begin() + std::min(data.size(), start + 4));
      total += m.train_step(batch, opt);
    }
    if (epoch == 0) first_epoch = total;
    last_epoch = total;
  }
  CHECK(last_epoch < 0.1 * first_epoch);
}

TEST_CASE("weight transfer across variants") {
  ModelConfig cfg_e = tiny_config(Variant::kEktvqa, 2, 21);
  ModelConfig cfg_t = tiny_config(Variant::kTvqa, 2, 21);
  AnswerVocab vocab = tiny_vocab();
  Model me(cfg_e, vocab);
  const nn::Checkpoint src = nn::Checkpoint::from_store(me.params());

  // Knowledge-bearing to knowledge-free: knowledge parameters are dropped.
  const nn::Checkpoint to_tvqa = transfer_weights(src, cfg_t, vocab);
  CHECK(to_tvqa.tensors.count("enc.knw.w") == 0);
  CHECK(to_tvqa.tensors.count("valid.wa") == 0);
  CHECK(to_tvqa.tensors.at("voc.w").values() ==
        src.tensors.at("voc.w").values());

  // Back the other way: knowledge parameters come from the target seed.
  Model mt(cfg_t, vocab);
  const nn::Checkpoint back =
      transfer_weights(nn::Checkpoint::from_store(mt.params()), cfg_e, vocab);
  Model fresh(cfg_e, vocab);
  CHECK(back.tensors.at("enc.knw.w").values() ==
        fresh.params().get("enc.knw.w").values());
  CHECK(back.tensors.at("valid.wa").values() ==
        fresh.params().get("valid.wa").values());
  CHECK(back.tensors.at("voc.w").values() ==
        mt.params().get("voc.w").values());

  // Identity transfer is byte-identical.
  const nn::Checkpoint same = transfer_weights(src, cfg_e, vocab);
  REQUIRE(same.tensors.size() == src.tensors.size());
  for (const auto& [name, t] : src.tensors) {
    CHECK(same.tensors.at(name).values() == t.values());
  }
}

TEST_CASE("variant policies pick facts differently") {
  knowledge::KBSnapshot kb = tiny_kb();

  ModelConfig cfg_all = tiny_config(Variant::kAll, 1);
  Model ma(cfg_all, tiny_vocab());
  PreparedInstance pa = prepare(cfg_all, &kb);
  CHECK(nn::all_finite(ma.forward(pa, {}).zknw));

  ModelConfig cfg_rnd = tiny_config(Variant::kRandom, 1);
  Model mr(cfg_rnd, tiny_vocab());
  PreparedInstance pr = prepare(cfg_rnd, &kb);
  CHECK(pr.random_choice[0] >= 0);
  CHECK(nn::all_finite(mr.forward(pr, {}).zknw));

  ModelConfig cfg_unc = tiny_config(Variant::kUnconstrained, 1);
  Model mu(cfg_unc, tiny_vocab());
  PreparedInstance pu = prepare(cfg_unc, &kb);
  Model::Forward fu = mu.forward(pu, {});
  for (double v : fu.mask.matrix) CHECK(v == 0.0);
}
