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

#include "ektvqa/io/dataset.hpp"

#include <json.hpp>

#include <fstream>
#include <unordered_map>

#include "ektvqa/error.hpp"
#include "ektvqa/strings.hpp"

namespace ektvqa::io {

namespace {

using json = nlohmann::json;
using features::BBox;
using features::OcrToken;
using features::QAInstance;
using features::VisualObject;

[[noreturn]] void schema_fail(std::size_t line, const std::string& what) {
  fail("E_SCHEMA", "dataset line " + std::to_string(line) + ": " + what);
}

BBox parse_bbox(const json& j, double w, double h, std::size_t line) {
  if (!j.is_array() || j.size() != 4) {
    schema_fail(line, "bbox must be [x1,y1,x2,y2]");
  }
  BBox b;
  b.x1 = j[0].get<double>();
  b.y1 = j[1].get<double>();
  b.x2 = j[2].get<double>();
  b.y2 = j[3].get<double>();
  b.image_w = w;
  b.image_h = h;
  if (!b.valid()) {
    schema_fail(line, "degenerate or out-of-range bbox");
  }
  return b;
}

json bbox_to_json(const BBox& b) {
  return json::array({b.x1, b.y1, b.x2, b.y2});
}

}  // namespace

std::vector<QAInstance> ingest_dataset(const std::string& path,
                                       const IngestOptions& opts,
                                       std::vector<std::string>* warnings) {
  std::ifstream is(path);
  if (!is) fail("E_IO", "cannot open dataset: " + path);
  std::vector<QAInstance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      schema_fail(line_no, e.what());
    }
    if (!rec.is_object()) schema_fail(line_no, "expected a JSON object");
    for (const char* key : {"question_id", "image_id", "question", "answers"}) {
      if (!rec.contains(key)) {
        schema_fail(line_no, std::string("missing field '") + key + "'");
      }
    }
    QAInstance inst;
    inst.question_id = rec["question_id"].get<std::int64_t>();
    inst.image_id = rec["image_id"].get<std::string>();
    inst.image_w = rec.value("image_w", 1.0);
    inst.image_h = rec.value("image_h", 1.0);
    if (inst.image_w <= 0 || inst.image_h <= 0) {
      schema_fail(line_no, "image dimensions must be positive");
    }
    inst.question_tokens = split_words(to_lower(rec["question"].get<std::string>()));
    if (inst.question_tokens.size() > opts.l_max) {
      if (warnings) {
        warnings->push_back("line " + std::to_string(line_no) +
                            ": question truncated to L_max");
      }
      inst.question_tokens.resize(opts.l_max);
    }
    if (!rec["answers"].is_array() || rec["answers"].empty()) {
      schema_fail(line_no, "answers must be a nonempty array");
    }
    if (opts.answer_count > 0 && rec["answers"].size() != opts.answer_count) {
      schema_fail(line_no, "expected " + std::to_string(opts.answer_count) +
                               " ground-truth answers, got " +
                               std::to_string(rec["answers"].size()));
    }
    for (const json& a : rec["answers"]) {
      inst.answers.push_back(normalize_answer(a.get<std::string>()));
    }
    for (const json& jo : rec.value("objects", json::array())) {
      if (inst.objects.size() >= opts.m_max) {
        if (warnings) {
          warnings->push_back("line " + std::to_string(line_no) +
                              ": objects truncated to M_max");
        }
        break;
      }
      if (!jo.contains("label") || !jo.contains("bbox")) {
        schema_fail(line_no, "object needs label and bbox");
      }
      VisualObject obj;
      obj.label = to_lower(jo["label"].get<std::string>());
      if (obj.label.empty()) schema_fail(line_no, "empty object label");
      obj.bbox = parse_bbox(jo["bbox"], inst.image_w, inst.image_h, line_no);
      if (jo.contains("fr")) {
        obj.fr_vec = jo["fr"].get<std::vector<double>>();
      }
      inst.objects.push_back(std::move(obj));
    }
    for (const json& jt : rec.value("ocr", json::array())) {
      if (inst.ocr.size() >= opts.n_max) {
        if (warnings) {
          warnings->push_back("line " + std::to_string(line_no) +
                              ": ocr truncated to N_max");
        }
        break;
      }
      if (!jt.contains("text") || !jt.contains("bbox")) {
        schema_fail(line_no, "ocr token needs text and bbox");
      }
      OcrToken tok;
      tok.text = to_lower(jt["text"].get<std::string>());
      if (tok.text.empty()) schema_fail(line_no, "empty ocr text");
      tok.bbox = parse_bbox(jt["bbox"], inst.image_w, inst.image_h, line_no);
      tok.reading_order =
          jt.value("reading_order", static_cast<std::uint64_t>(inst.ocr.size()));
      if (jt.contains("fr")) {
        tok.fr_vec = jt["fr"].get<std::vector<double>>();
      }
      inst.ocr.push_back(std::move(tok));
    }
    out.push_back(std::move(inst));
  }
  return out;
}

void emit_dataset(const std::vector<QAInstance>& instances,
                  const std::string& path) {
  std::ofstream os(path);
  if (!os) fail("E_IO", "cannot write dataset: " + path);
  for (const QAInstance& inst : instances) {
    json rec;
    rec["question_id"] = inst.question_id;
    rec["image_id"] = inst.image_id;
    rec["image_w"] = inst.image_w;
    rec["image_h"] = inst.image_h;
    rec["question"] = join_words(inst.question_tokens);
    rec["answers"] = inst.answers;
    rec["objects"] = json::array();
    for (const VisualObject& obj : inst.objects) {
      rec["objects"].push_back(
          {{"label", obj.label}, {"bbox", bbox_to_json(obj.bbox)}});
    }
    rec["ocr"] = json::array();
    for (const OcrToken& tok : inst.ocr) {
      rec["ocr"].push_back({{"text", tok.text},
                            {"bbox", bbox_to_json(tok.bbox)},
                            {"reading_order", tok.reading_order}});
    }
    os << rec.dump() << "\n";
  }
}

void apply_feature_file(std::vector<QAInstance>& instances,
                        const std::string& path, std::size_t fr_dim) {
  std::ifstream is(path);
  if (!is) fail("E_IO", "cannot open feature file: " + path);
  struct Record {
    std::vector<std::pair<std::string, std::vector<double>>> objects;
    std::vector<std::pair<std::string, std::vector<double>>> ocr;
  };
  std::unordered_map<std::string, Record> by_image;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      fail("E_SCHEMA",
           "feature file line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!rec.contains("image_id")) {
      fail("E_SCHEMA", "feature file line " + std::to_string(line_no) +
                           ": missing image_id");
    }
    Record r;
    auto read_list = [&](const char* key, const char* name_key,
                         std::vector<std::pair<std::string, std::vector<double>>>&
                             into) {
      for (const json& j : rec.value(key, json::array())) {
        std::vector<double> fr = j.value("fr", std::vector<double>{});
        if (fr.size() != fr_dim) {
          fail("E_SCHEMA", "feature file line " + std::to_string(line_no) +
                               ": fr width " + std::to_string(fr.size()) +
                               " != " + std::to_string(fr_dim));
        }
        into.emplace_back(to_lower(j.value(name_key, std::string())),
                          std::move(fr));
      }
    };
    read_list("objects", "label", r.objects);
    read_list("ocr", "text", r.ocr);
    by_image[rec["image_id"].get<std::string>()] = std::move(r);
  }

  for (QAInstance& inst : instances) {
    auto it = by_image.find(inst.image_id);
    if (it == by_image.end()) continue;
    const Record& r = it->second;
    for (std::size_t i = 0; i < inst.objects.size() && i < r.objects.size();
         ++i) {
      if (r.objects[i].first != inst.objects[i].label) {
        fail("E_SCHEMA", "feature file object mismatch for image " +
                             inst.image_id + " at index " + std::to_string(i));
      }
      inst.objects[i].fr_vec = r.objects[i].second;
    }
    for (std::size_t i = 0; i < inst.ocr.size() && i < r.ocr.size(); ++i) {
      if (r.ocr[i].first != inst.ocr[i].text) {
        fail("E_SCHEMA", "feature file ocr mismatch for image " +
                             inst.image_id + " at index " + std::to_string(i));
      }
      inst.ocr[i].fr_vec = r.ocr[i].second;
    }
  }
}

void write_predictions(
    const std::vector<std::pair<std::int64_t, std::string>>& preds,
    const std::string& path) {
  std::ofstream os(path);
  if (!os) fail("E_IO", "cannot write predictions: " + path);
  for (const auto& [qid, answer] : preds) {
    json rec;
    rec["question_id"] = qid;
    rec["answer"] = answer;
    os << rec.dump() << "\n";
  }
}

}  // namespace ektvqa::io
