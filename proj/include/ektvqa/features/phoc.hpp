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

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace ektvqa::features {

// Pyramidal histogram of characters over the 36-symbol alphabet a-z0-9:
// unigram levels 2+3+4+5 (14 regions x 36 = 504 bits) plus the 50 most
// common English bigrams at level 2 (2 x 50 = 100 bits).
inline constexpr std::size_t kPhocUnigramBits = 504;
inline constexpr std::size_t kPhocBigramBits = 100;
inline constexpr std::size_t kPhocDim = kPhocUnigramBits + kPhocBigramBits;

// Binary {0,1} vector of length kPhocDim. Input is lowercased and stripped
// to [a-z0-9]; a word that is empty after stripping encodes to all zeros.
// A character occupies [c/n, (c+1)/n] of the word; its bit in a region is
// set iff the overlap covers at least half of the character's occupancy.
std::vector<double> phoc_encode(std::string_view word);

// Single-level unigram histogram (level regions x 36), same occupancy
// rule. Exposed for the pyramid's per-level properties.
std::vector<double> phoc_level_histogram(std::string_view word,
                                         std::size_t level);

// Strips a word to the phoc alphabet (lowercased [a-z0-9]).
std::string phoc_clean(std::string_view word);

}  // namespace ektvqa::features
