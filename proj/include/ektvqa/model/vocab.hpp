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

namespace ektvqa::model {

inline constexpr const char* kBeginMarker = "<s>";
inline constexpr const char* kEndMarker = "</s>";

// Fixed vocabulary of common answer words, plus the begin/end markers at
// the front. H is frozen once the projection matrix is created.
class AnswerVocab {
 public:
  static AnswerVocab from_words(std::vector<std::string> words);
  static AnswerVocab load(const std::string& path);
  void save(const std::string& path) const;

  std::size_t size() const { return words_.size(); }  // H
  const std::string& word(std::size_t i) const { return words_[i]; }
  const std::vector<std::string>& words() const { return words_; }
  std::optional<std::size_t> find(const std::string& word) const;

  std::size_t begin_index() const { return begin_index_; }
  std::size_t end_index() const { return end_index_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t begin_index_ = 0;
  std::size_t end_index_ = 1;
};

}  // namespace ektvqa::model
