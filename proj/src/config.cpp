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

#include "ektvqa/io/config.hpp"

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "ektvqa/error.hpp"

namespace ektvqa::io {

namespace {

using json = nlohmann::json;

template <typename T>
void read_if(const json& j, const char* key, T& into) {
  if (j.contains(key)) into = j[key].get<T>();
}

}  // namespace

model::Variant RunConfig::parsed_variant() const {
  return model::variant_from_string(variant);
}

model::ModelConfig RunConfig::model_config() const {
  model::ModelConfig mc;
  mc.dims.d_model = d_model;
  mc.dims.ctx_dim = ctx_dim;
  mc.dims.ft_dim = ft_dim;
  mc.dims.fr_dim = fr_dim;
  mc.dims.decode_steps = decode_steps;
  mc.n_heads = n_heads;
  mc.n_layers = n_layers;
  mc.validity_hidden = validity_hidden;
  mc.variant = parsed_variant();
  mc.seed = seed;
  mc.open_knowledge_context = open_knowledge_context;
  return mc;
}

IngestOptions RunConfig::ingest_options() const {
  IngestOptions opts;
  opts.l_max = l_max;
  opts.m_max = m_max;
  opts.n_max = n_max;
  opts.answer_count = answer_count;
  return opts;
}

void RunConfig::validate() const {
  const model::Variant v = parsed_variant();
  if (!model::variant_uses_knowledge(v) && !kb_path.empty()) {
    fail("E_CONFIG", "variant '" + variant + "' does not take a KB path");
  }
  if (model::variant_uses_knowledge(v) && kb_path.empty()) {
    fail("E_CONFIG", "variant '" + variant + "' requires kb_path");
  }
  if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0) {
    fail("E_CONFIG", "d_model must be a positive multiple of n_heads");
  }
  if (decode_steps == 0) fail("E_CONFIG", "decode_steps must be >= 1");
  if (batch_size == 0) fail("E_CONFIG", "batch_size must be >= 1");
  if (plateau_factor <= 0.0 || plateau_factor >= 1.0) {
    fail("E_CONFIG", "plateau_factor must be in (0, 1)");
  }
}

RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail("E_IO", "cannot open config: " + path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    fail("E_CONFIG", std::string("config parse error: ") + e.what());
  }
  RunConfig cfg;
  read_if(j, "seed", cfg.seed);
  read_if(j, "d_model", cfg.d_model);
  read_if(j, "n_heads", cfg.n_heads);
  read_if(j, "n_layers", cfg.n_layers);
  read_if(j, "ctx_dim", cfg.ctx_dim);
  read_if(j, "ft_dim", cfg.ft_dim);
  read_if(j, "fr_dim", cfg.fr_dim);
  read_if(j, "l_max", cfg.l_max);
  read_if(j, "m_max", cfg.m_max);
  read_if(j, "n_max", cfg.n_max);
  read_if(j, "decode_steps", cfg.decode_steps);
  read_if(j, "validity_hidden", cfg.validity_hidden);
  read_if(j, "variant", cfg.variant);
  read_if(j, "learning_rate", cfg.learning_rate);
  read_if(j, "epochs", cfg.epochs);
  read_if(j, "batch_size", cfg.batch_size);
  read_if(j, "plateau_factor", cfg.plateau_factor);
  read_if(j, "plateau_patience", cfg.plateau_patience);
  read_if(j, "answer_count", cfg.answer_count);
  read_if(j, "kb_raw_cap", cfg.kb_raw_cap);
  read_if(j, "open_knowledge_context", cfg.open_knowledge_context);
  read_if(j, "vocab_path", cfg.vocab_path);
  read_if(j, "kb_path", cfg.kb_path);
  read_if(j, "train_path", cfg.train_path);
  read_if(j, "val_path", cfg.val_path);
  read_if(j, "features_path", cfg.features_path);
  return cfg;
}

void apply_override(RunConfig& cfg, const std::string& key,
                    const std::string& value) {
  auto as_u64 = [&](std::uint64_t& into) { into = std::stoull(value); };
  auto as_size = [&](std::size_t& into) { into = std::stoull(value); };
  auto as_double = [&](double& into) { into = std::stod(value); };
  auto as_bool = [&](bool& into) {
    into = (value == "1" || value == "true" || value == "yes");
  };
  try {
    if (key == "seed") as_u64(cfg.seed);
    else if (key == "d_model") as_size(cfg.d_model);
    else if (key == "n_heads") as_size(cfg.n_heads);
    else if (key == "n_layers") as_size(cfg.n_layers);
    else if (key == "ctx_dim") as_size(cfg.ctx_dim);
    else if (key == "ft_dim") as_size(cfg.ft_dim);
    else if (key == "fr_dim") as_size(cfg.fr_dim);
    else if (key == "l_max") as_size(cfg.l_max);
    else if (key == "m_max") as_size(cfg.m_max);
    else if (key == "n_max") as_size(cfg.n_max);
    else if (key == "decode_steps") as_size(cfg.decode_steps);
    else if (key == "validity_hidden") as_size(cfg.validity_hidden);
    else if (key == "variant") cfg.variant = value;
    else if (key == "learning_rate") as_double(cfg.learning_rate);
    else if (key == "epochs") as_size(cfg.epochs);
    else if (key == "batch_size") as_size(cfg.batch_size);
    else if (key == "plateau_factor") as_double(cfg.plateau_factor);
    else if (key == "plateau_patience") as_size(cfg.plateau_patience);
    else if (key == "answer_count") as_size(cfg.answer_count);
    else if (key == "kb_raw_cap") as_size(cfg.kb_raw_cap);
    else if (key == "open_knowledge_context") as_bool(cfg.open_knowledge_context);
    else if (key == "vocab_path") cfg.vocab_path = value;
    else if (key == "kb_path") cfg.kb_path = value;
    else if (key == "train_path") cfg.train_path = value;
    else if (key == "val_path") cfg.val_path = value;
    else if (key == "features_path") cfg.features_path = value;
    else fail("E_CONFIG", "unknown config key: " + key);
  } catch (const std::invalid_argument&) {
    fail("E_CONFIG", "bad value for " + key + ": " + value);
  } catch (const std::out_of_range&) {
    fail("E_CONFIG", "bad value for " + key + ": " + value);
  }
}

std::string resolve_path(const std::string& path) {
  if (path.empty()) return path;
  std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  const char* root = std::getenv(kDataRootEnv);
  if (root == nullptr || *root == '\0') return path;
  return (std::filesystem::path(root) / p).string();
}

}  // namespace ektvqa::io
