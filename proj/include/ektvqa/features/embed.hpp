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

#include <string_view>
#include <vector>

namespace ektvqa::features {

// Deterministic stand-in for a pretrained text embedder. The text is
// lowercased and split into words; each word contributes a unit vector
// seeded by hash(namespace, word) and the sum is L2-normalized, so texts
// sharing words land near each other while unrelated words stay near
// orthogonal at realistic dims. Identical (text, dim, namespace) always
// yields identical output, across runs and platforms.
std::vector<double> stub_text_embed(std::string_view text, std::size_t dim,
                                    std::string_view ns);

// Single-token hash vector (no word splitting), unit norm.
std::vector<double> stub_word_vector(std::string_view word, std::size_t dim,
                                     std::string_view ns);

double dot(const std::vector<double>& a, const std::vector<double>& b);
double l2_norm(const std::vector<double>& v);

// Embedder namespaces. Question words, object labels, OCR texts and
// knowledge descriptions share kContextNs, standing in for one contextual
// sentence embedder; kSubwordNs stands in for the subword word-vector
// model; kRegionNs for the visual region extractor.
inline constexpr std::string_view kContextNs = "ctx";
inline constexpr std::string_view kSubwordNs = "subword";
inline constexpr std::string_view kRegionNs = "region";

}  // namespace ektvqa::features
