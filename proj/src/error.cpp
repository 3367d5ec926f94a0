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
#include "icefuse/error.hpp"

namespace icefuse {

std::string_view error_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kDimension: return "dimension";
    case ErrorKind::kConfiguration: return "configuration";
    case ErrorKind::kData: return "data";
    case ErrorKind::kUsage: return "usage";
    case ErrorKind::kDegenerateStatistics: return "degenerate-statistics";
    case ErrorKind::kDeadNode: return "dead-node";
    case ErrorKind::kProvenance: return "provenance";
    case ErrorKind::kIntegrity: return "integrity";
    case ErrorKind::kUnsupportedVersion: return "unsupported-version";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

int exit_status(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kUsage:
    case ErrorKind::kConfiguration:
      return 2;
    case ErrorKind::kProvenance:
      return 4;
    default:
      return 3;
  }
}

}  // namespace icefuse
