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

#include "ektvqa/error.hpp"
#include "ektvqa/model/mask.hpp"
#include "ektvqa/rng.hpp"

using namespace ektvqa;
using namespace ektvqa::model;

TEST_CASE("constrained mask: worked example L=2 M=1 N=2 D=3") {
  const AttentionMaskSpec spec =
      build_attention_mask(2, 1, 2, 3, MaskMode::kConstrained);
  CHECK(spec.e() == 10);

  // Knowledge row for fact 0 (row 5) opens only at OCR column 0 (col 3)
  // and itself (col 5).
  for (std::size_t j = 0; j < 10; ++j) {
    const bool expected = (j == 3 || j == 5);
    CHECK(spec.open(5, j) == expected);
  }

  // Question/object/OCR block fully open.
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) CHECK(spec.open(i, j));

  // Causal prediction block: row d sees steps <= d only.
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(spec.open(7 + i, 7 + j) == (j <= i));
}

TEST_CASE("unconstrained mode is the all-zero matrix") {
  const AttentionMaskSpec spec =
      build_attention_mask(2, 2, 3, 4, MaskMode::kUnconstrained);
  for (double v : spec.matrix) CHECK(v == 0.0);
  CHECK(spec.e() == 2 + 2 + 3 + 3 + 4);
}

TEST_CASE("no-knowledge mode drops the knowledge rows") {
  const AttentionMaskSpec spec =
      build_attention_mask(2, 1, 3, 4, MaskMode::kNoKnowledge);
  CHECK(spec.e() == 2 + 1 + 3 + 4);
}

TEST_CASE("image-level mode opens the knowledge blocks") {
  const AttentionMaskSpec spec =
      build_attention_mask(1, 1, 2, 2, MaskMode::kImageLevel);
  const std::size_t knw0 = 4;
  // Free interaction with the context, no identity coupling.
  CHECK(spec.open(knw0, 0));
  CHECK(spec.open(knw0, knw0 + 1));
  CHECK(spec.open(0, knw0));
  CHECK(spec.open(knw0 + 1, 2));
}

TEST_CASE("mask structure holds for randomized block sizes") {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t l = rng.index(5);
    const std::size_t m = rng.index(4);
    const std::size_t n = rng.index(5);
    const std::size_t d = 1 + rng.index(6);
    const AttentionMaskSpec spec =
        build_attention_mask(l, m, n, d, MaskMode::kConstrained);
    const std::size_t e = l + m + n + n + d;
    CHECK(spec.e() == e);
    const std::size_t ctx = l + m + n;
    const std::size_t knw0 = ctx;
    const std::size_t prv0 = ctx + n;

    // Identity coupling blocks in both directions.
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        CHECK(spec.open(knw0 + i, l + m + j) == (i == j));
        CHECK(spec.open(l + m + i, knw0 + j) == (i == j));
      }
      // Knowledge rows/columns closed against question and objects.
      for (std::size_t j = 0; j < l + m; ++j) {
        CHECK_FALSE(spec.open(knw0 + i, j));
        CHECK_FALSE(spec.open(j, knw0 + i));
      }
    }

    // Lower-triangular prediction block; context rows never see
    // prediction columns.
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        CHECK(spec.open(prv0 + i, prv0 + j) == (j <= i));
    for (std::size_t i = 0; i < prv0; ++i)
      for (std::size_t j = prv0; j < e; ++j) CHECK_FALSE(spec.open(i, j));

    // No fully masked rows.
    for (std::size_t i = 0; i < e; ++i) {
      bool any = false;
      for (std::size_t j = 0; j < e; ++j) any = any || spec.open(i, j);
      CHECK(any);
    }
  }
}

TEST_CASE("open knowledge-context flag widens the constrained mask") {
  const AttentionMaskSpec spec =
      build_attention_mask(2, 1, 2, 2, MaskMode::kConstrained, true);
  CHECK(spec.open(5, 0));  // knowledge row reads the question
  CHECK(spec.open(0, 5));  // and vice versa
}

TEST_CASE("degenerate constructions are rejected") {
  CHECK_THROWS_AS(build_attention_mask(2, 1, 2, 0, MaskMode::kConstrained),
                  Error);
}
