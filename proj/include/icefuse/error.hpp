// Copyright 2026 The icefuse Authors. All Rights Reserved.
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
#include <string_view>

namespace icefuse {

enum class ErrorKind {
  kDimension,
  kConfiguration,
  kData,
  kUsage,
  kDegenerateStatistics,
  kDeadNode,
  kProvenance,
  kIntegrity,
  kUnsupportedVersion,
  kIo,
};

/// Stable machine-readable code, e.g. "dimension" or "provenance".
std::string_view error_code(ErrorKind kind) noexcept;

/// Exit status used by the command-line tool for each error kind.
/// 2 = usage, 3 = data/format, 4 = provenance violation.
int exit_status(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace icefuse
