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

#include <stdexcept>
#include <string>

namespace ektvqa {

// Every failure carries a short machine-parsable code ("E_SHAPE",
// "E_SCHEMA", ...) plus human-readable text. The CLI prints
// "error: <code>: <text>" on one line and exits nonzero.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

[[noreturn]] inline void fail(std::string code, const std::string& message) {
  throw Error(std::move(code), message);
}

}  // namespace ektvqa
