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

#include "ektvqa/features/embed.hpp"

#include <cmath>
#include <string>

#include "ektvqa/rng.hpp"
#include "ektvqa/strings.hpp"

namespace ektvqa::features {

namespace {

void normalize(std::vector<double>& v) {
  const double n = l2_norm(v);
  if (n > 0.0) {
    for (double& x : v) x /= n;
  }
}

}  // namespace

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(const std::vector<double>& v) {
  return std::sqrt(dot(v, v));
}

std::vector<double> stub_word_vector(std::string_view word, std::size_t dim,
                                     std::string_view ns) {
  std::string key;
  key.reserve(ns.size() + word.size() + 1);
  key.append(ns);
  key.push_back('\x1f');
  key.append(word);
  Rng rng(fnv1a64(key));
  std::vector<double> v(dim);
  for (double& x : v) x = rng.normal();
  normalize(v);
  return v;
}

std::vector<double> stub_text_embed(std::string_view text, std::size_t dim,
                                    std::string_view ns) {
  const std::vector<std::string> words = split_words(to_lower(text));
  if (words.empty()) return stub_word_vector("", dim, ns);
  std::vector<double> acc(dim, 0.0);
  for (const std::string& w : words) {
    const std::vector<double> wv = stub_word_vector(w, dim, ns);
    for (std::size_t i = 0; i < dim; ++i) acc[i] += wv[i];
  }
  normalize(acc);
  if (l2_norm(acc) == 0.0) return stub_word_vector(text, dim, ns);
  return acc;
}

}  // namespace ektvqa::features
