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

#include <set>
#include <string>

#include "ektvqa/features/phoc.hpp"
#include "ektvqa/rng.hpp"

using namespace ektvqa;
using namespace ektvqa::features;

namespace {

// Region offsets of the unigram pyramid: level 2 at 0, 3 at 2, 4 at 5, 5 at 9.
std::size_t uni_bit(std::size_t level_offset, std::size_t region, char c) {
  const std::size_t ci = (c >= 'a' && c <= 'z')
                             ? static_cast<std::size_t>(c - 'a')
                             : 26 + static_cast<std::size_t>(c - '0');
  return (level_offset + region) * 36 + ci;
}

std::size_t support(const std::vector<double>& bits) {
  std::size_t n = 0;
  for (double b : bits) n += (b != 0.0);
  return n;
}

std::size_t distinct_chars(const std::vector<double>& level_bits,
                           std::size_t level) {
  std::set<std::size_t> chars;
  for (std::size_t r = 0; r < level; ++r) {
    for (std::size_t c = 0; c < 36; ++c) {
      if (level_bits[r * 36 + c] != 0.0) chars.insert(c);
    }
  }
  return chars.size();
}

}  // namespace

TEST_CASE("phoc dimensions and binary range") {
  const std::vector<double> v = phoc_encode("coffee");
  CHECK(v.size() == kPhocDim);
  CHECK(kPhocDim == 604);
  for (double b : v) CHECK((b == 0.0 || b == 1.0));
}

TEST_CASE("empty-after-stripping word encodes to all zeros") {
  CHECK(support(phoc_encode("")) == 0);
  CHECK(support(phoc_encode("!!--??")) == 0);
}

TEST_CASE("single character occupies the whole word span") {
  // 'a' covers [0,1]; at level 2 each region overlaps exactly half the
  // character span, so both level-2 bits fire. At levels 3..5 no region
  // reaches half the span, so the occupancy rule leaves them empty.
  const std::vector<double> v = phoc_encode("a");
  CHECK(v[uni_bit(0, 0, 'a')] == 1.0);
  CHECK(v[uni_bit(0, 1, 'a')] == 1.0);
  CHECK(support(v) == 2);
}

TEST_CASE("two characters split cleanly at level 2") {
  const std::vector<double> v = phoc_encode("ab");
  CHECK(v[uni_bit(0, 0, 'a')] == 1.0);
  CHECK(v[uni_bit(0, 1, 'a')] == 0.0);
  CHECK(v[uni_bit(0, 0, 'b')] == 0.0);
  CHECK(v[uni_bit(0, 1, 'b')] == 1.0);
}

TEST_CASE("digits are part of the alphabet") {
  const std::vector<double> v = phoc_encode("a1");
  CHECK(v[uni_bit(0, 1, '1')] == 1.0);
}

TEST_CASE("bigram bits fire for common pairs") {
  // "er" occupies the second half of "beer": level-2 region 1 only. The
  // bigram block starts at bit 504 and "er" is the first bigram.
  const std::vector<double> v = phoc_encode("beer");
  CHECK(v[504 + 0 * 50 + 0] == 0.0);
  CHECK(v[504 + 1 * 50 + 0] == 1.0);
}

TEST_CASE("pure function: idempotent and case-insensitive") {
  CHECK(phoc_encode("MiXeD123") == phoc_encode("mixed123"));
  CHECK(phoc_encode("word") == phoc_encode("word"));
  CHECK(phoc_clean("Ab-9z!") == "ab9z");
}

TEST_CASE("single-level support of distinct characters is monotone under insertion") {
  Rng rng(2024);
  const std::string alphabet = "abcd";
  for (int trial = 0; trial < 400; ++trial) {
    const std::size_t len = 1 + rng.index(6);
    std::string w1;
    for (std::size_t i = 0; i < len; ++i)
      w1.push_back(alphabet[rng.index(alphabet.size())]);
    std::string w2 = w1;
    w2.insert(w2.begin() + static_cast<long>(rng.index(w2.size() + 1)),
              alphabet[rng.index(alphabet.size())]);
    for (std::size_t level : {1, 2, 3, 4, 5}) {
      const std::size_t s1 =
          distinct_chars(phoc_level_histogram(w1, level), level);
      const std::size_t s2 =
          distinct_chars(phoc_level_histogram(w2, level), level);
      CHECK(s2 >= s1);
    }
  }
}

TEST_CASE("level histogram matches the pyramid's corresponding slice") {
  // Level 2 of the pyramid occupies regions 0..1.
  const std::string word = "market";
  const std::vector<double> lvl = phoc_level_histogram(word, 2);
  const std::vector<double> full = phoc_encode(word);
  for (std::size_t i = 0; i < 2 * 36; ++i) CHECK(lvl[i] == full[i]);
}
