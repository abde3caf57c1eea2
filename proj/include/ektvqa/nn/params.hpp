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

#include <map>
#include <string>
#include <vector>

#include "ektvqa/nn/tensor.hpp"

namespace ektvqa::nn {

// Named trainable parameters. Names are canonical dotted paths
// ("layers.0.attn.heads.2.wq") and double as the checkpoint key space.
// std::map keeps iteration order deterministic.
class ParamStore {
 public:
  Tensor& create(const std::string& name, Tensor t);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const { return params_.count(name) > 0; }

  void zero_grad();
  std::size_t size() const { return params_.size(); }

  std::map<std::string, Tensor>& entries() { return params_; }
  const std::map<std::string, Tensor>& entries() const { return params_; }

  std::vector<std::string> names() const;

 private:
  std::map<std::string, Tensor> params_;
};

// Checkpoint container: a versioned flat map from parameter name to shape +
// row-major float64 payload, written little-endian. Round-trips byte-exact.
struct Checkpoint {
  std::map<std::string, Tensor> tensors;

  static Checkpoint from_store(const ParamStore& store);
  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  // Copies values into matching store entries. Missing or shape-mismatched
  // names raise E_CHECKPOINT with a full diff of names and shapes.
  void apply_to(ParamStore& store) const;
};

}  // namespace ektvqa::nn
