/*
 * Copyright 2026 the hetsim authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>

namespace hetsim {

// Counter-based generator: output i of substream (seed, stream_id) is a pure
// function of (seed, stream_id, i). Substreams can be handed out per node or
// edge instance without any coordination, and equal (seed, stream_id) always
// replays the same sequence. The mixer is the SplitMix64 finalizer.
struct RngState {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  std::uint64_t counter = 0;

  RngState() = default;
  RngState(std::uint64_t seed_, std::uint64_t stream_id_) : seed(seed_), stream_id(stream_id_) {}

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() {
    std::uint64_t key = mix(seed + 0x9e3779b97f4a7c15ull) ^ mix(stream_id * 0xd1342543de82ef95ull + 1);
    std::uint64_t v = mix(key + (++counter) * 0x9e3779b97f4a7c15ull);
    return v;
  }

  /// Uniform double in [0, 1), 53 significant bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform index in [0, n). Lemire-style multiply-shift; no modulo bias
  /// large enough to matter, and deterministic everywhere.
  std::uint64_t next_index(std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }
};

}  // namespace hetsim
