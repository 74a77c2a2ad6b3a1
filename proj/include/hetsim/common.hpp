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

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hetsim {

/// Simulation time in integer microseconds. All engine bookkeeping is done
/// on this grid so that runs are reproducible bit for bit.
using SimTime = std::int64_t;

class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Input file could not be parsed. `line` is 1-based, 0 if not applicable.
class ParseError : public Error {
public:
  ParseError(const std::string& msg, int line = 0)
      : Error(line > 0 ? msg + " (line " + std::to_string(line) + ")" : msg), line_(line) {}
  int line() const { return line_; }

private:
  int line_;
};

/// The event calendar drained while sinks were still missing frames.
class DeadlockError : public Error {
public:
  explicit DeadlockError(const std::string& msg) : Error(msg) {}
};

/// Round a sampled duration (microseconds, real-valued) onto the integer
/// grid, half up. Negative inputs clamp to zero.
inline SimTime round_duration_us(double us) {
  if (!(us > 0.0)) return 0;
  return static_cast<SimTime>(std::llround(us));
}

/// FNV-1a, used to derive stable RNG substream ids from instance names.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace hetsim
