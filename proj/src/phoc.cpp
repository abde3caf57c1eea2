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

#include "ektvqa/features/phoc.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace ektvqa::features {

namespace {

constexpr std::array<std::size_t, 4> kUnigramLevels = {2, 3, 4, 5};
constexpr std::size_t kUnigramCount = 36;
constexpr std::size_t kBigramCount = 50;
constexpr std::size_t kBigramLevel = 2;

// 50 most frequent English bigrams.
constexpr std::array<const char*, kBigramCount> kBigrams = {
    "er", "in", "es", "ti", "te", "at", "on", "an", "en", "st",
    "al", "re", "is", "ed", "le", "ra", "ri", "li", "ar", "ng",
    "ne", "ic", "or", "nt", "ss", "ro", "la", "se", "de", "co",
    "ca", "ta", "io", "it", "si", "us", "ea", "ac", "el", "ma",
    "na", "ni", "tr", "ch", "di", "ia", "et", "to", "un", "ns"};

int unigram_index(char c) {
  if (c >= 'a' && c <= 'z') return c - 'a';
  if (c >= '0' && c <= '9') return 26 + (c - '0');
  return -1;
}

int bigram_index(std::string_view pair) {
  for (std::size_t i = 0; i < kBigramCount; ++i)
    if (pair == kBigrams[i]) return static_cast<int>(i);
  return -1;
}

// Occupancy rule shared by unigrams and bigrams: a symbol spanning
// [lo, hi] of the word claims a region when the overlap covers at least
// half of the symbol span.
bool occupies(double lo, double hi, double region_lo, double region_hi) {
  const double overlap = std::min(hi, region_hi) - std::max(lo, region_lo);
  return overlap >= 0.5 * (hi - lo) - 1e-9;
}

}  // namespace

std::string phoc_clean(std::string_view word) {
  std::string out;
  out.reserve(word.size());
  for (char raw : word) {
    const char c =
        static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
    if (unigram_index(c) >= 0) out.push_back(c);
  }
  return out;
}

std::vector<double> phoc_level_histogram(std::string_view word,
                                         std::size_t level) {
  std::vector<double> bits(level * kUnigramCount, 0.0);
  const std::string w = phoc_clean(word);
  const double n = static_cast<double>(w.size());
  for (std::size_t c = 0; c < w.size(); ++c) {
    const int u = unigram_index(w[c]);
    const double lo = static_cast<double>(c) / n;
    const double hi = static_cast<double>(c + 1) / n;
    for (std::size_t r = 0; r < level; ++r) {
      const double rl = static_cast<double>(r) / static_cast<double>(level);
      const double rh =
          static_cast<double>(r + 1) / static_cast<double>(level);
      if (occupies(lo, hi, rl, rh)) {
        bits[r * kUnigramCount + static_cast<std::size_t>(u)] = 1.0;
      }
    }
  }
  return bits;
}

std::vector<double> phoc_encode(std::string_view word) {
  std::vector<double> out(kPhocDim, 0.0);
  const std::string w = phoc_clean(word);
  if (w.empty()) return out;
  const double n = static_cast<double>(w.size());

  std::size_t region_base = 0;
  for (std::size_t level : kUnigramLevels) {
    for (std::size_t c = 0; c < w.size(); ++c) {
      const int u = unigram_index(w[c]);
      const double lo = static_cast<double>(c) / n;
      const double hi = static_cast<double>(c + 1) / n;
      for (std::size_t r = 0; r < level; ++r) {
        const double rl = static_cast<double>(r) / static_cast<double>(level);
        const double rh =
            static_cast<double>(r + 1) / static_cast<double>(level);
        if (occupies(lo, hi, rl, rh)) {
          out[(region_base + r) * kUnigramCount + static_cast<std::size_t>(u)] =
              1.0;
        }
      }
    }
    region_base += level;
  }

  for (std::size_t c = 0; c + 1 < w.size(); ++c) {
    const char pair[2] = {w[c], w[c + 1]};
    const int b = bigram_index(std::string_view(pair, 2));
    if (b < 0) continue;
    const double lo = static_cast<double>(c) / n;
    const double hi = static_cast<double>(c + 2) / n;
    for (std::size_t r = 0; r < kBigramLevel; ++r) {
      const double rl = static_cast<double>(r) / static_cast<double>(kBigramLevel);
      const double rh =
          static_cast<double>(r + 1) / static_cast<double>(kBigramLevel);
      if (occupies(lo, hi, rl, rh)) {
        out[kPhocUnigramBits + r * kBigramCount + static_cast<std::size_t>(b)] =
            1.0;
      }
    }
  }
  return out;
}

}  // namespace ektvqa::features
