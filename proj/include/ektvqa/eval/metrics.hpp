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

#include "ektvqa/features/types.hpp"
#include "ektvqa/model/vocab.hpp"

namespace ektvqa::eval {

// Levenshtein distance with unit insert/delete/substitute costs.
int edit_distance(std::string_view a, std::string_view b);

// Normalized Levenshtein similarity: 1 - d/max(|pred|, |gt|). Two empty
// strings are an exact match and score 1.
double nls(std::string_view pred, std::string_view gt);

struct EvalRecord {
  std::string prediction;
  std::vector<std::string> ground_truths;  // nonempty, normalized
};

// Per record: best NLS over ground truths, truncated to 0 below the
// threshold, then averaged over records.
double anls(const std::vector<EvalRecord>& records, double threshold = 0.5);

// Soft-vote accuracy against exactly ten ground truths: min(matches/3, 1).
double vqa_accuracy(const std::string& prediction,
                    const std::vector<std::string>& ten_answers);

struct UpperBoundReport {
  double ocr_ub = 0;    // % of questions answerable from OCR tokens alone
  double vocab_ub = 0;  // % answerable from vocabulary words alone
  double both_ub = 0;   // % answerable from the union
};

// A question counts toward a bound when any of its ground-truth answers
// tokenizes entirely into the corresponding word set.
UpperBoundReport upper_bounds(const std::vector<features::QAInstance>& data,
                              const model::AnswerVocab& vocab);

}  // namespace ektvqa::eval
