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

#include "ektvqa/eval/metrics.hpp"

#include <algorithm>
#include <unordered_set>

#include "ektvqa/error.hpp"
#include "ektvqa/strings.hpp"

namespace ektvqa::eval {

int edit_distance(std::string_view a, std::string_view b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<int> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= m; ++j) {
      const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double nls(std::string_view pred, std::string_view gt) {
  const std::size_t longest = std::max(pred.size(), gt.size());
  if (longest == 0) return 1.0;  // both empty: exact match
  const double d = static_cast<double>(edit_distance(pred, gt));
  return 1.0 - d / static_cast<double>(longest);
}

double anls(const std::vector<EvalRecord>& records, double threshold) {
  if (records.empty()) fail("E_CONTRACT", "anls: no records");
  double total = 0.0;
  for (const EvalRecord& rec : records) {
    if (rec.ground_truths.empty()) {
      fail("E_CONTRACT", "anls: record without ground truths");
    }
    double best = 0.0;
    for (const std::string& gt : rec.ground_truths) {
      best = std::max(best, nls(rec.prediction, gt));
    }
    if (best < threshold) best = 0.0;
    total += best;
  }
  return total / static_cast<double>(records.size());
}

double vqa_accuracy(const std::string& prediction,
                    const std::vector<std::string>& ten_answers) {
  if (ten_answers.size() != 10) {
    fail("E_CONTRACT", "vqa_accuracy: expected 10 ground truths, got " +
                           std::to_string(ten_answers.size()));
  }
  const std::string pred = normalize_answer(prediction);
  int matches = 0;
  for (const std::string& gt : ten_answers) {
    if (normalize_answer(gt) == pred) ++matches;
  }
  return std::min(1.0, static_cast<double>(matches) / 3.0);
}

namespace {

bool composable(const std::string& answer,
                const std::unordered_set<std::string>& words) {
  const std::vector<std::string> parts =
      split_words(normalize_answer(answer));
  if (parts.empty()) return false;
  for (const std::string& w : parts) {
    if (!words.count(w)) return false;
  }
  return true;
}

}  // namespace

UpperBoundReport upper_bounds(const std::vector<features::QAInstance>& data,
                              const model::AnswerVocab& vocab) {
  UpperBoundReport report;
  if (data.empty()) return report;

  std::unordered_set<std::string> vocab_words;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    const std::string& w = vocab.word(i);
    if (w == model::kBeginMarker || w == model::kEndMarker) continue;
    vocab_words.insert(w);
  }

  std::size_t ocr_hits = 0, vocab_hits = 0, both_hits = 0;
  for (const features::QAInstance& inst : data) {
    std::unordered_set<std::string> ocr_words;
    for (const features::OcrToken& t : inst.ocr) {
      for (const std::string& w : split_words(t.text)) ocr_words.insert(w);
    }
    std::unordered_set<std::string> both = ocr_words;
    both.insert(vocab_words.begin(), vocab_words.end());

    bool from_ocr = false, from_vocab = false, from_both = false;
    for (const std::string& ans : inst.answers) {
      from_ocr = from_ocr || composable(ans, ocr_words);
      from_vocab = from_vocab || composable(ans, vocab_words);
      from_both = from_both || composable(ans, both);
    }
    ocr_hits += from_ocr;
    vocab_hits += from_vocab;
    both_hits += from_both;
  }
  const double n = static_cast<double>(data.size());
  report.ocr_ub = 100.0 * static_cast<double>(ocr_hits) / n;
  report.vocab_ub = 100.0 * static_cast<double>(vocab_hits) / n;
  report.both_ub = 100.0 * static_cast<double>(both_hits) / n;
  return report;
}

}  // namespace ektvqa::eval
