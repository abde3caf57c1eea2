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
#include "ektvqa/features/embed.hpp"
#include "ektvqa/features/encoders.hpp"
#include "ektvqa/features/phoc.hpp"
#include "ektvqa/features/types.hpp"
#include "ektvqa/nn/finite_diff.hpp"

using namespace ektvqa;
using namespace ektvqa::features;

namespace {

FeatureDims tiny_dims() {
  FeatureDims d;
  d.d_model = 16;
  d.ctx_dim = 24;
  d.ft_dim = 10;
  d.fr_dim = 12;
  d.phoc_dim = kPhocDim;
  d.decode_steps = 6;
  return d;
}

BBox box(double x1, double y1, double x2, double y2, double w = 100,
         double h = 100) {
  return {x1, y1, x2, y2, w, h};
}

}  // namespace

TEST_CASE("embed_bbox normalizes coordinates") {
  CHECK(embed_bbox(box(0, 0, 100, 100)) ==
        std::vector<double>{0.0, 0.0, 1.0, 1.0});
  CHECK(embed_bbox(box(10, 20, 30, 40)) ==
        std::vector<double>{0.1, 0.2, 0.3, 0.4});
  // Translated copies of the same shape embed differently.
  CHECK(embed_bbox(box(10, 10, 20, 20)) != embed_bbox(box(30, 10, 40, 20)));
  CHECK_THROWS_AS(embed_bbox(box(10, 10, 10, 20)), Error);
}

TEST_CASE("stub_text_embed is deterministic, unit-norm and spread out") {
  const auto a1 = stub_text_embed("cat", 64, kContextNs);
  const auto a2 = stub_text_embed("cat", 64, kContextNs);
  CHECK(a1 == a2);
  CHECK(std::abs(l2_norm(a1) - 1.0) < 1e-12);

  const auto b = stub_text_embed("dog", 64, kContextNs);
  CHECK(std::abs(dot(a1, b)) < 0.9);

  // Namespaces separate the embedding families.
  const auto c = stub_text_embed("cat", 64, kSubwordNs);
  CHECK(std::abs(dot(a1, c)) < 0.9);
}

TEST_CASE("stub_text_embed composes over words") {
  // Texts sharing a word are closer than unrelated texts.
  const auto ab = stub_text_embed("coffee company", 128, kContextNs);
  const auto a = stub_text_embed("coffee", 128, kContextNs);
  const auto z = stub_text_embed("tractor", 128, kContextNs);
  CHECK(dot(ab, a) > 0.5);
  CHECK(std::abs(dot(ab, z)) < 0.4);
}

TEST_CASE("encode_object follows the two-branch layer-norm form") {
  FeatureDims dims = tiny_dims();
  nn::ParamStore store;
  Rng rng(3);
  EncoderParams p = EncoderParams::create(store, dims, true, rng);

  VisualObject obj;
  obj.label = "monitor";
  obj.bbox = box(5, 5, 50, 60);
  fill_object_features(obj, dims, "img0");
  nn::Tensor out = encode_object(obj, p, 1e-6);
  CHECK(out.shape() == nn::Shape{dims.d_model});
  CHECK(nn::all_finite(out));

  // Zero projections leave only the eps-guarded layer norm of zero.
  store.get("enc.obj.w_fr").mutable_values().assign(
      store.get("enc.obj.w_fr").size(), 0.0);
  store.get("enc.obj.w_b").mutable_values().assign(
      store.get("enc.obj.w_b").size(), 0.0);
  nn::Tensor zeroed = encode_object(obj, p, 1e-6);
  for (double v : zeroed.values()) CHECK(v == 0.0);
}

TEST_CASE("encode_object gradients pass the finite-difference oracle") {
  FeatureDims dims = tiny_dims();
  Rng rng(5);
  VisualObject obj;
  obj.label = "keyboard";
  obj.bbox = box(10, 10, 90, 40);
  fill_object_features(obj, dims, "img1");

  auto f = [&](const std::vector<nn::Tensor>& leaves) {
    nn::ParamStore store;
    Rng r2(7);
    EncoderParams p = EncoderParams::create(store, dims, false, r2);
    p.obj_w_fr = leaves[0];
    p.obj_w_b = leaves[1];
    p.obj_ln1_g = leaves[2];
    p.obj_ln2_b = leaves[3];
    return sum(encode_object(obj, p, 1e-5));
  };
  const double err = nn::finite_diff_check(
      f,
      {nn::Tensor::uniform({dims.fr_dim, dims.d_model}, rng, 0.4),
       nn::Tensor::uniform({4, dims.d_model}, rng, 0.4),
       nn::Tensor::uniform({dims.d_model}, rng, 0.9),
       nn::Tensor::uniform({dims.d_model}, rng, 0.9)},
      1e-5, 40);
  CHECK(err < 1e-4);
}

TEST_CASE("encode_ocr keeps phoc live and isolates the spatial branch") {
  FeatureDims dims = tiny_dims();
  nn::ParamStore store;
  Rng rng(11);
  EncoderParams p = EncoderParams::create(store, dims, false, rng);

  OcrToken tok;
  tok.text = "commodore";
  tok.bbox = box(10, 10, 60, 30);
  fill_ocr_features(tok, dims, "img2");
  nn::Tensor base = encode_ocr(tok, p, 1e-6);
  CHECK(base.shape() == nn::Shape{dims.d_model});

  // Zeroing the phoc vector must change the output.
  OcrToken no_ph = tok;
  no_ph.ph_vec.assign(dims.phoc_dim, 0.0);
  nn::Tensor without = encode_ocr(no_ph, p, 1e-6);
  bool changed = false;
  for (std::size_t i = 0; i < base.size(); ++i)
    changed = changed || base.at(i) != without.at(i);
  CHECK(changed);

  // Tokens identical except for the box differ only via the spatial term.
  OcrToken moved = tok;
  moved.bbox = box(40, 50, 90, 70);
  nn::Tensor other = encode_ocr(moved, p, 1e-6);
  nn::Tensor spatial_a = layer_norm(
      linear(nn::Tensor::from({4}, embed_bbox(tok.bbox)), p.ocr_w_b),
      p.ocr_ln2_g, p.ocr_ln2_b, 1e-6);
  nn::Tensor spatial_b = layer_norm(
      linear(nn::Tensor::from({4}, embed_bbox(moved.bbox)), p.ocr_w_b),
      p.ocr_ln2_g, p.ocr_ln2_b, 1e-6);
  for (std::size_t i = 0; i < base.size(); ++i) {
    CHECK(base.at(i) - spatial_a.at(i) ==
          doctest::Approx(other.at(i) - spatial_b.at(i)).epsilon(1e-12));
  }
}

TEST_CASE("previous-prediction embedding follows the choice kind") {
  FeatureDims dims = tiny_dims();
  nn::ParamStore store;
  Rng rng(13);
  EncoderParams p = EncoderParams::create(store, dims, false, rng);
  nn::Tensor w_voc =
      nn::Tensor::uniform({dims.d_model, 7}, rng, 0.5, true);

  std::vector<nn::Tensor> ocr_rows;
  for (int i = 0; i < 4; ++i) {
    ocr_rows.push_back(nn::Tensor::uniform({dims.d_model}, rng, 1.0, false));
  }

  auto expect = [&](const nn::Tensor& base, std::size_t step,
                    const nn::Tensor& got) {
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got.at(i) ==
            doctest::Approx(base.at(i) + p.prev_pos.at(step, i)));
    }
  };

  // Step 0 is the begin column regardless of the recorded choice.
  nn::Tensor begin = embed_previous_prediction(
      {PrevChoice::Kind::kOcr, 2}, 0, ocr_rows, w_voc, 0, p.prev_pos);
  expect(select_column(w_voc, 0), 0, begin);

  nn::Tensor from_ocr = embed_previous_prediction(
      {PrevChoice::Kind::kOcr, 3}, 2, ocr_rows, w_voc, 0, p.prev_pos);
  expect(ocr_rows[3], 2, from_ocr);

  nn::Tensor from_vocab = embed_previous_prediction(
      {PrevChoice::Kind::kVocab, 5}, 1, ocr_rows, w_voc, 0, p.prev_pos);
  expect(select_column(w_voc, 5), 1, from_vocab);

  CHECK_THROWS_AS(
      embed_previous_prediction({PrevChoice::Kind::kOcr, 9}, 1, ocr_rows,
                                w_voc, 0, p.prev_pos),
      Error);
  CHECK_THROWS_AS(
      embed_previous_prediction({PrevChoice::Kind::kVocab, 99}, 1, ocr_rows,
                                w_voc, 0, p.prev_pos),
      Error);
}

TEST_CASE("encoders are deterministic given input, parameters and seed") {
  FeatureDims dims = tiny_dims();
  nn::ParamStore store;
  Rng rng(17);
  EncoderParams p = EncoderParams::create(store, dims, false, rng);
  OcrToken tok;
  tok.text = "vertu";
  tok.bbox = box(1, 2, 30, 20);
  fill_ocr_features(tok, dims, "img3");
  CHECK(encode_ocr(tok, p, 1e-6).values() ==
        encode_ocr(tok, p, 1e-6).values());
}
