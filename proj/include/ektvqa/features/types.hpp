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
#include <vector>

namespace ektvqa::features {

struct BBox {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  double image_w = 1, image_h = 1;

  bool valid() const {
    return image_w > 0 && image_h > 0 && 0 <= x1 && x1 < x2 && x2 <= image_w &&
           0 <= y1 && y1 < y2 && y2 <= image_h;
  }
};

// [x1/w, y1/h, x2/w, y2/h], all in [0, 1].
std::vector<double> embed_bbox(const BBox& box);

// One recognized scene-text word. The content vectors are filled during
// instance preparation (stub embedders or a precomputed-feature file), not
// stored in datasets. A multiword bound entity keeps its full phrase in
// `text` and the union box in `bbox`.
struct OcrToken {
  std::string text;  // nonempty, lowercased at ingestion
  BBox bbox;
  std::size_t reading_order = 0;
  std::vector<double> ft_vec;  // subword word embedding
  std::vector<double> fr_vec;  // region appearance
  std::vector<double> ph_vec;  // phoc, binary {0,1}
};

struct VisualObject {
  std::string label;  // nonempty
  BBox bbox;
  std::vector<double> fr_vec;  // region appearance
};

// One question-image sample. Counts are bounded by the run configuration
// (L_max/M_max/N_max) at ingestion; padding is the model's business.
struct QAInstance {
  std::int64_t question_id = 0;
  std::string image_id;
  double image_w = 1, image_h = 1;
  std::vector<std::string> question_tokens;
  std::vector<VisualObject> objects;
  std::vector<OcrToken> ocr;
  std::vector<std::string> answers;
};

}  // namespace ektvqa::features
