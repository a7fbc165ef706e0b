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

#ifndef QUICFUZZ_VARINT_H_
#define QUICFUZZ_VARINT_H_

#include <cstdint>
#include <optional>
#include <utility>

#include "quicfuzz/common.h"

namespace quicfuzz {

// QUIC variable-length integer. `length` is the on-wire width (1, 2, 4 or 8)
// and is kept alongside the value so non-minimal encodings found in seeds
// survive a parse/serialize cycle.
struct VarInt {
  static constexpr uint64_t kMax = (uint64_t{1} << 62) - 1;

  uint64_t value = 0;
  uint8_t length = 1;

  static VarInt Minimal(uint64_t v);

  bool operator==(const VarInt&) const = default;
};

// Smallest width able to carry `v`. Throws kOverflow above kMax.
uint8_t MinimalVarIntLength(uint64_t v);
bool VarIntFits(uint64_t v, uint8_t length);

// Decodes at bytes[cursor]. Returns the value and the number of bytes used.
std::pair<VarInt, size_t> DecodeVarInt(ByteSpan bytes, size_t cursor);

// Appends the encoding of `v` to `out`. With `forced_len`, uses exactly that
// width (kLengthTooSmall if it cannot represent `v`).
void EncodeVarInt(uint64_t v, Bytes& out,
                  std::optional<uint8_t> forced_len = std::nullopt);
Bytes EncodeVarInt(uint64_t v, std::optional<uint8_t> forced_len = std::nullopt);

// Writes `v` keeping its recorded width when the value still fits, otherwise
// the minimal width.
void EncodeVarIntPreferWidth(uint64_t value, uint8_t width, Bytes& out);

}  // namespace quicfuzz

#endif  // QUICFUZZ_VARINT_H_
