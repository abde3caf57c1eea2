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

#include "ektvqa/features/encoders.hpp"

#include <cmath>
#include <sstream>

#include "ektvqa/error.hpp"
#include "ektvqa/features/embed.hpp"
#include "ektvqa/features/phoc.hpp"

namespace ektvqa::features {

namespace {

using nn::Tensor;

Tensor constant(const std::vector<double>& v) {
  return Tensor::from({v.size()}, v);
}

void check_dim(const std::vector<double>& v, std::size_t dim,
               const char* what) {
  if (v.size() != dim) {
    fail("E_SHAPE", std::string(what) + " has length " +
                        std::to_string(v.size()) + ", expected " +
                        std::to_string(dim));
  }
}

std::string instance_key(const std::string& image_id, const BBox& b) {
  std::ostringstream os;
  os << image_id << '#' << b.x1 << ',' << b.y1 << ',' << b.x2 << ',' << b.y2;
  return os.str();
}

std::vector<double> region_stub(std::string_view class_key,
                                const std::string& inst_key, std::size_t dim) {
  std::vector<double> v =
      stub_word_vector(class_key, dim, kRegionNs);
  const std::vector<double> noise = stub_word_vector(inst_key, dim, kRegionNs);
  for (std::size_t i = 0; i < dim; ++i) v[i] += 0.5 * noise[i];
  const double n = l2_norm(v);
  for (double& x : v) x /= n;
  return v;
}

}  // namespace

std::vector<double> embed_bbox(const BBox& box) {
  if (!box.valid()) {
    fail("E_CONTRACT", "embed_bbox: degenerate or out-of-range box");
  }
  return {box.x1 / box.image_w, box.y1 / box.image_h, box.x2 / box.image_w,
          box.y2 / box.image_h};
}

EncoderParams EncoderParams::create(nn::ParamStore& store,
                                    const FeatureDims& dims,
                                    bool with_knowledge, Rng& rng) {
  EncoderParams p;
  const std::size_t d = dims.d_model;
  auto w = [&](const std::string& name, std::size_t in, std::size_t out) {
    return store.create(
        name, Tensor::uniform({in, out}, rng,
                              1.0 / std::sqrt(static_cast<double>(in))));
  };
  auto ln = [&](const std::string& name, Tensor& g, Tensor& b) {
    g = store.create(name + ".gamma", Tensor::full({d}, 1.0, true));
    b = store.create(name + ".beta", Tensor::zeros({d}, true));
  };
  p.q_w = w("enc.q.w", dims.ctx_dim, d);
  ln("enc.q.ln", p.q_ln_g, p.q_ln_b);
  p.obj_w_fr = w("enc.obj.w_fr", dims.fr_dim, d);
  p.obj_w_b = w("enc.obj.w_b", 4, d);
  ln("enc.obj.ln1", p.obj_ln1_g, p.obj_ln1_b);
  ln("enc.obj.ln2", p.obj_ln2_g, p.obj_ln2_b);
  p.ocr_w_ft = w("enc.ocr.w_ft", dims.ft_dim, d);
  p.ocr_w_fr = w("enc.ocr.w_fr", dims.fr_dim, d);
  p.ocr_w_ph = w("enc.ocr.w_ph", dims.phoc_dim, d);
  p.ocr_w_b = w("enc.ocr.w_b", 4, d);
  ln("enc.ocr.ln1", p.ocr_ln1_g, p.ocr_ln1_b);
  ln("enc.ocr.ln2", p.ocr_ln2_g, p.ocr_ln2_b);
  if (with_knowledge) {
    p.knw_w = w("enc.knw.w", dims.ctx_dim, d);
    p.knw_null = store.create(
        "enc.knw.null",
        Tensor::uniform({dims.ctx_dim}, rng,
                        1.0 / std::sqrt(static_cast<double>(dims.ctx_dim))));
  }
  p.prev_pos = store.create(
      "prev.pos", Tensor::uniform({dims.decode_steps, d}, rng,
                                  1.0 / std::sqrt(static_cast<double>(d))));
  return p;
}

void fill_object_features(VisualObject& obj, const FeatureDims& dims,
                          const std::string& image_id) {
  if (obj.fr_vec.empty()) {
    obj.fr_vec = region_stub(obj.label, instance_key(image_id, obj.bbox),
                             dims.fr_dim);
  }
  check_dim(obj.fr_vec, dims.fr_dim, "object fr vector");
}

void fill_ocr_features(OcrToken& tok, const FeatureDims& dims,
                       const std::string& image_id) {
  if (tok.ft_vec.empty()) {
    tok.ft_vec = stub_text_embed(tok.text, dims.ft_dim, kSubwordNs);
  }
  if (tok.fr_vec.empty()) {
    tok.fr_vec = region_stub("scene-text", instance_key(image_id, tok.bbox),
                             dims.fr_dim);
  }
  if (tok.ph_vec.empty()) {
    tok.ph_vec = phoc_encode(tok.text);
  }
  check_dim(tok.ft_vec, dims.ft_dim, "ocr ft vector");
  check_dim(tok.fr_vec, dims.fr_dim, "ocr fr vector");
  check_dim(tok.ph_vec, dims.phoc_dim, "ocr phoc vector");
}

void fill_instance_features(QAInstance& inst, const FeatureDims& dims) {
  for (VisualObject& obj : inst.objects)
    fill_object_features(obj, dims, inst.image_id);
  for (OcrToken& tok : inst.ocr) fill_ocr_features(tok, dims, inst.image_id);
}

nn::Tensor encode_question_word(const std::string& word,
                                const EncoderParams& p,
                                const FeatureDims& dims, double ln_eps) {
  Tensor x = constant(stub_text_embed(word, dims.ctx_dim, kContextNs));
  return layer_norm(linear(x, p.q_w), p.q_ln_g, p.q_ln_b, ln_eps);
}

nn::Tensor encode_object(const VisualObject& obj, const EncoderParams& p,
                         double ln_eps) {
  if (obj.fr_vec.empty()) {
    fail("E_CONTRACT", "encode_object: fr vector missing for '" + obj.label +
                           "'");
  }
  Tensor appearance = layer_norm(linear(constant(obj.fr_vec), p.obj_w_fr),
                                 p.obj_ln1_g, p.obj_ln1_b, ln_eps);
  Tensor spatial = layer_norm(linear(constant(embed_bbox(obj.bbox)), p.obj_w_b),
                              p.obj_ln2_g, p.obj_ln2_b, ln_eps);
  return add(appearance, spatial);
}

nn::Tensor encode_ocr(const OcrToken& tok, const EncoderParams& p,
                      double ln_eps) {
  if (tok.ft_vec.empty() || tok.fr_vec.empty() || tok.ph_vec.empty()) {
    fail("E_CONTRACT",
         "encode_ocr: content vectors missing for '" + tok.text + "'");
  }
  Tensor content = add(add(linear(constant(tok.ft_vec), p.ocr_w_ft),
                           linear(constant(tok.fr_vec), p.ocr_w_fr)),
                       linear(constant(tok.ph_vec), p.ocr_w_ph));
  Tensor first = layer_norm(content, p.ocr_ln1_g, p.ocr_ln1_b, ln_eps);
  Tensor spatial = layer_norm(linear(constant(embed_bbox(tok.bbox)), p.ocr_w_b),
                              p.ocr_ln2_g, p.ocr_ln2_b, ln_eps);
  return add(first, spatial);
}

nn::Tensor embed_previous_prediction(const PrevChoice& prev, std::size_t step,
                                     const std::vector<nn::Tensor>& ocr_rows,
                                     const nn::Tensor& w_voc,
                                     std::size_t begin_index,
                                     const nn::Tensor& prev_pos) {
  if (step >= prev_pos.shape()[0]) {
    fail("E_CONTRACT", "previous-prediction step " + std::to_string(step) +
                           " exceeds the decode-step table");
  }
  Tensor base;
  if (step == 0 || prev.kind == PrevChoice::Kind::kBegin) {
    base = select_column(w_voc, begin_index);
  } else if (prev.kind == PrevChoice::Kind::kOcr) {
    if (prev.index >= ocr_rows.size()) {
      fail("E_CONTRACT", "previous-prediction OCR index out of range");
    }
    base = ocr_rows[prev.index];
  } else {
    if (prev.index >= w_voc.shape()[1]) {
      fail("E_CONTRACT", "previous-prediction vocab index out of range");
    }
    base = select_column(w_voc, prev.index);
  }
  return add(base, select_row(prev_pos, step));
}

}  // namespace ektvqa::features
