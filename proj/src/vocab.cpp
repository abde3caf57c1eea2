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

#include "ektvqa/model/vocab.hpp"

#include <fstream>

#include "ektvqa/error.hpp"
#include "ektvqa/strings.hpp"

namespace ektvqa::model {

AnswerVocab AnswerVocab::from_words(std::vector<std::string> words) {
  AnswerVocab v;
  v.words_.push_back(kBeginMarker);
  v.words_.push_back(kEndMarker);
  for (std::string& w : words) {
    const std::string lw = to_lower(w);
    if (lw.empty() || lw == kBeginMarker || lw == kEndMarker) continue;
    if (v.index_.count(lw)) continue;
    v.index_[lw] = v.words_.size();
    v.words_.push_back(lw);
  }
  v.begin_index_ = 0;
  v.end_index_ = 1;
  v.index_[kBeginMarker] = 0;
  v.index_[kEndMarker] = 1;
  return v;
}

AnswerVocab AnswerVocab::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail("E_IO", "cannot open vocabulary: " + path);
  std::vector<std::string> words;
  std::string line;
  while (std::getline(is, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
      line.pop_back();
    if (!line.empty()) words.push_back(line);
  }
  return from_words(std::move(words));
}

void AnswerVocab::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) fail("E_IO", "cannot write vocabulary: " + path);
  for (std::size_t i = 2; i < words_.size(); ++i) os << words_[i] << "\n";
}

std::optional<std::size_t> AnswerVocab::find(const std::string& word) const {
  auto it = index_.find(to_lower(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

}  // namespace ektvqa::model
