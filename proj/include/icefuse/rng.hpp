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

#include <cstdint>

namespace icefuse {

// Counter-based generator: the n-th draw is a pure function of (key, n), so a
// stream can be re-created anywhere from its key alone. Streams for layers,
// training steps or scenes are derived with derive(), which never touches the
// parent's counter.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : key_(mix(seed ^ 0x6a09e667f3bcc908ULL)) {}

  SeededRng derive(std::uint64_t stream) const;

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal via Box-Muller; uses exactly two counter steps per draw.
  double normal();

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

  static std::uint64_t mix(std::uint64_t z);

 private:
  SeededRng(std::uint64_t key, int) : key_(key) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace icefuse
