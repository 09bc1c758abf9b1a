// Copyright 2026 The moska-ref Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MOSKA_ERROR_HPP
#define MOSKA_ERROR_HPP

#include <stdexcept>
#include <string>

namespace moska {

enum class ErrorKind {
  kInvalidArgument,
  kDimensionMismatch,
  kConfig,
  kIo,
  kPolicyMismatch,
};

// Single exception type for the core; the C API maps `kind()` onto status
// codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void Fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace moska

#endif  // MOSKA_ERROR_HPP
