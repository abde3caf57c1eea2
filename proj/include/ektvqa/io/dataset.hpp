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
#include <vector>

#include "ektvqa/features/types.hpp"

namespace ektvqa::io {

struct IngestOptions {
  std::size_t l_max = 20;  // question words
  std::size_t m_max = 12;  // objects
  std::size_t n_max = 12;  // OCR tokens
  // Expected ground-truth answers per record; 0 accepts any count >= 1.
  // Accuracy-metric datasets use 10.
  std::size_t answer_count = 0;
};

// Line-delimited JSON, one instance per line. Text is lowercased and
// questions tokenized at ingestion; schema violations name the offending
// line; over-limit lists are truncated with a warning.
std::vector<features::QAInstance> ingest_dataset(
    const std::string& path, const IngestOptions& opts,
    std::vector<std::string>* warnings = nullptr);

void emit_dataset(const std::vector<features::QAInstance>& instances,
                  const std::string& path);

// Optional precomputed-feature file: per image, appearance vectors for
// objects and OCR tokens in record order. Entries must agree with the
// dataset on label/text; vector widths are validated against fr_dim.
void apply_feature_file(std::vector<features::QAInstance>& instances,
                        const std::string& path, std::size_t fr_dim);

// Per-question predictions, line-delimited {question_id, answer}.
void write_predictions(
    const std::vector<std::pair<std::int64_t, std::string>>& preds,
    const std::string& path);

}  // namespace ektvqa::io
