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

#include <cstdint>
#include <string>
#include <vector>

#include "ektvqa/io/dataset.hpp"
#include "ektvqa/model/model.hpp"

namespace ektvqa::io {

// Data root environment variable; relative data paths resolve against it.
inline constexpr const char* kDataRootEnv = "EKTVQA_DATA_ROOT";

struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t d_model = 768;
  std::size_t n_heads = 8;
  std::size_t n_layers = 4;
  std::size_t ctx_dim = 768;
  std::size_t ft_dim = 300;
  std::size_t fr_dim = 2048;
  std::size_t l_max = 20;
  std::size_t m_max = 12;
  std::size_t n_max = 12;
  std::size_t decode_steps = 12;
  std::size_t validity_hidden = 256;
  std::string variant = "ektvqa";
  double learning_rate = 1e-4;
  std::size_t epochs = 10;
  std::size_t batch_size = 8;
  double plateau_factor = 0.5;
  std::size_t plateau_patience = 3;
  std::size_t answer_count = 1;  // 10 on accuracy-metric datasets, 0 = any
  std::size_t kb_raw_cap = 10;
  bool open_knowledge_context = false;
  std::string vocab_path;
  std::string kb_path;
  std::string train_path;
  std::string val_path;
  std::string features_path;

  model::Variant parsed_variant() const;
  model::ModelConfig model_config() const;
  IngestOptions ingest_options() const;
  // Checks cross-field consistency (e.g. a knowledge-free variant must not
  // carry a KB path).
  void validate() const;
};

RunConfig load_config(const std::string& path);
// Key/value override for any scalar config field ("--epochs 30").
void apply_override(RunConfig& cfg, const std::string& key,
                    const std::string& value);
// Resolves a data path against EKTVQA_DATA_ROOT when relative.
std::string resolve_path(const std::string& path);

}  // namespace ektvqa::io
