// Copyright 2026 The QuicFuzz Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Byte buffers, hex helpers, the error type shared by every module, and the
// deterministic RNG used by the mutation engine and scheduler.

#ifndef QUICFUZZ_COMMON_H_
#define QUICFUZZ_COMMON_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace quicfuzz {

using Bytes = std::vector<uint8_t>;
using ByteSpan = std::span<const uint8_t>;

enum class Errc {
  kTruncated,
  kMalformed,
  kOverflow,
  kLengthTooSmall,
  kUnrepresentable,
  kUnsupportedVersion,
  kNoKeys,
  kAuthFailure,
  kMissingSlot,
  kBadHex,
  kWrongLength,
  kUnknownKey,
  kNoInitialPacket,
  kBadMagic,
  kTruncatedRecord,
  kIoFailure,
  kCorruptArtifact,
  kRendezvousTimeout,
  kAdapterClosed,
  kInitTimeout,
  kSpawnFailure,
  kHandleDead,
  kTargetUnavailable,
  kCorpusEmpty,
  kInvalidArgument,
};

std::string_view ErrcName(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(ErrcName(code)) + ": " + what),
        code_(code) {}

  Errc code() const { return code_; }

 private:
  Errc code_;
};

// Direction of a datagram on the wire. Also selects which half of a
// SecretSet protects it.
enum class Direction : uint8_t { kClientToServer = 0, kServerToClient = 1 };

std::string ToHex(ByteSpan bytes);
// Accepts upper/lower case; throws Error(kBadHex) on odd length or bad digits.
Bytes FromHex(std::string_view hex);

inline Bytes ToBytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

// 64-bit FNV-1a. Used for content-addressed artifact names and the
// instrumentation block ids of the reference server.
constexpr uint64_t Fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (char c : s) {
    h ^= static_cast<uint8_t>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}
uint64_t Fnv1a64(ByteSpan bytes);

// splitmix64-seeded xoshiro256**. Fixed algorithm so campaigns replay
// identically across standard library implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t Next();
  // Uniform in [0, n). Returns 0 when n == 0.
  uint64_t Below(uint64_t n);
  // True with probability p.
  bool Chance(double p);
  double Unit();

 private:
  uint64_t s_[4];
};

}  // namespace quicfuzz

#endif  // QUICFUZZ_COMMON_H_
