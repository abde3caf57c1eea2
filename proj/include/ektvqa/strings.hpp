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

#include <string>
#include <string_view>
#include <vector>

namespace ektvqa {

std::string to_lower(std::string_view s);

// Splits on runs of whitespace; never returns empty pieces.
std::vector<std::string> split_words(std::string_view s);

std::string join_words(const std::vector<std::string>& words,
                       std::string_view sep = " ");

// Lowercase, trim outer whitespace, strip punctuation from word edges,
// collapse internal whitespace to single spaces.
std::string normalize_answer(std::string_view s);

// True when `needle` (one or more words) occurs in `haystack` as a run of
// whole words, case-insensitively. Word characters are [a-z0-9]; anything
// else is a boundary.
bool contains_whole_word(std::string_view haystack, std::string_view needle);

}  // namespace ektvqa
