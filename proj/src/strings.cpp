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

#include "ektvqa/strings.hpp"

#include <cctype>

namespace ektvqa {

namespace {

bool is_space(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

}  // namespace

std::string to_lower(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    out.push_back(
        static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    std::size_t start = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    if (i > start) words.emplace_back(s.substr(start, i - start));
  }
  return words;
}

std::string join_words(const std::vector<std::string>& words,
                       std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out.append(sep);
    out.append(words[i]);
  }
  return out;
}

std::string normalize_answer(std::string_view s) {
  std::vector<std::string> words = split_words(to_lower(s));
  std::vector<std::string> kept;
  for (std::string& w : words) {
    std::size_t b = 0;
    std::size_t e = w.size();
    while (b < e && !is_word_char(w[b])) ++b;
    while (e > b && !is_word_char(w[e - 1])) --e;
    if (e > b) kept.push_back(w.substr(b, e - b));
  }
  return join_words(kept);
}

bool contains_whole_word(std::string_view haystack, std::string_view needle) {
  const std::vector<std::string> hay = split_words(to_lower(haystack));
  const std::vector<std::string> want = split_words(to_lower(needle));
  if (want.empty() || hay.empty()) return false;

  // Strip non-word edges so "York," still matches "york".
  auto trim = [](const std::string& w) {
    std::size_t b = 0, e = w.size();
    while (b < e && !is_word_char(w[b])) ++b;
    while (e > b && !is_word_char(w[e - 1])) --e;
    return w.substr(b, e - b);
  };
  std::vector<std::string> hay_trim;
  hay_trim.reserve(hay.size());
  for (const std::string& w : hay) hay_trim.push_back(trim(w));

  for (std::size_t start = 0; start + want.size() <= hay_trim.size();
       ++start) {
    bool all = true;
    for (std::size_t k = 0; k < want.size(); ++k) {
      if (hay_trim[start + k] != want[k]) {
        all = false;
        break;
      }
    }
    if (all) return true;
  }
  return false;
}

}  // namespace ektvqa
