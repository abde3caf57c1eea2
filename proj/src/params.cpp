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

#include "ektvqa/nn/params.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ektvqa/error.hpp"

namespace ektvqa::nn {

namespace {

constexpr char kMagic[4] = {'E', 'K', 'T', 'C'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const std::string& path) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) fail("E_CHECKPOINT", "truncated checkpoint file: " + path);
  return v;
}

}  // namespace

Tensor& ParamStore::create(const std::string& name, Tensor t) {
  if (params_.count(name)) {
    fail("E_CONTRACT", "parameter already exists: " + name);
  }
  auto [it, ok] = params_.emplace(name, std::move(t));
  return it->second;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) fail("E_CONTRACT", "unknown parameter: " + name);
  return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) fail("E_CONTRACT", "unknown parameter: " + name);
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& [name, t] : params_) t.zero_grad();
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [name, t] : params_) out.push_back(name);
  return out;
}

Checkpoint Checkpoint::from_store(const ParamStore& store) {
  Checkpoint ck;
  for (const auto& [name, t] : store.entries()) {
    ck.tensors.emplace(name,
                       Tensor::from(t.shape(), t.values(), false));
  }
  return ck;
}

void Checkpoint::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail("E_IO", "cannot open checkpoint for writing: " + path);
  os.write(kMagic, 4);
  write_pod<std::uint32_t>(os, kVersion);
  write_pod<std::uint64_t>(os, tensors.size());
  for (const auto& [name, t] : tensors) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(t.shape().size()));
    for (std::size_t d : t.shape())
      write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(d));
    os.write(reinterpret_cast<const char*>(t.values().data()),
             static_cast<std::streamsize>(t.values().size() * sizeof(double)));
  }
  if (!os) fail("E_IO", "failed writing checkpoint: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail("E_IO", "cannot open checkpoint: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    fail("E_CHECKPOINT", "bad checkpoint magic in " + path);
  }
  const auto version = read_pod<std::uint32_t>(is, path);
  if (version != kVersion) {
    fail("E_CHECKPOINT", "unsupported checkpoint version " +
                             std::to_string(version) + " in " + path);
  }
  const auto count = read_pod<std::uint64_t>(is, path);
  Checkpoint ck;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<std::uint32_t>(is, path);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is) fail("E_CHECKPOINT", "truncated checkpoint file: " + path);
    const auto rank = read_pod<std::uint32_t>(is, path);
    Shape shape(rank);
    for (auto& d : shape)
      d = static_cast<std::size_t>(read_pod<std::uint64_t>(is, path));
    std::vector<double> values(numel(shape));
    is.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!is) fail("E_CHECKPOINT", "truncated checkpoint file: " + path);
    ck.tensors.emplace(name, Tensor::from(std::move(shape), std::move(values),
                                          false));
  }
  return ck;
}

void Checkpoint::apply_to(ParamStore& store) const {
  // Build a full diff before failing so mismatches are actionable.
  std::ostringstream diff;
  bool mismatch = false;
  for (const auto& [name, t] : store.entries()) {
    auto it = tensors.find(name);
    if (it == tensors.end()) {
      diff << "  missing in checkpoint: " << name << " "
           << shape_str(t.shape()) << "\n";
      mismatch = true;
    } else if (it->second.shape() != t.shape()) {
      diff << "  shape mismatch: " << name << " model "
           << shape_str(t.shape()) << " vs checkpoint "
           << shape_str(it->second.shape()) << "\n";
      mismatch = true;
    }
  }
  for (const auto& [name, t] : tensors) {
    if (!store.has(name)) {
      diff << "  missing in model: " << name << " " << shape_str(t.shape())
           << "\n";
      mismatch = true;
    }
  }
  if (mismatch) {
    fail("E_CHECKPOINT", "checkpoint/model parameter diff:\n" + diff.str());
  }
  for (const auto& [name, t] : tensors) {
    store.get(name).mutable_values() = t.values();
  }
}

}  // namespace ektvqa::nn
