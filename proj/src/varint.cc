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

#include "quicfuzz/varint.h"

#include <string>

namespace quicfuzz {

VarInt VarInt::Minimal(uint64_t v) { return VarInt{v, MinimalVarIntLength(v)}; }

uint8_t MinimalVarIntLength(uint64_t v) {
  if (v < (uint64_t{1} << 6)) return 1;
  if (v < (uint64_t{1} << 14)) return 2;
  if (v < (uint64_t{1} << 30)) return 4;
  if (v <= VarInt::kMax) return 8;
  throw Error(Errc::kOverflow, "varint value " + std::to_string(v));
}

bool VarIntFits(uint64_t v, uint8_t length) {
  switch (length) {
    case 1: return v < (uint64_t{1} << 6);
    case 2: return v < (uint64_t{1} << 14);
    case 4: return v < (uint64_t{1} << 30);
    case 8: return v <= VarInt::kMax;
    default: return false;
  }
}

std::pair<VarInt, size_t> DecodeVarInt(ByteSpan bytes, size_t cursor) {
  if (cursor >= bytes.size()) throw Error(Errc::kTruncated, "varint at end of buffer");
  const uint8_t first = bytes[cursor];
  const size_t len = size_t{1} << (first >> 6);
  if (bytes.size() - cursor < len) throw Error(Errc::kTruncated, "varint body");
  uint64_t v = first & 0x3f;
  for (size_t i = 1; i < len; ++i) v = (v << 8) | bytes[cursor + i];
  return {VarInt{v, static_cast<uint8_t>(len)}, len};
}

void EncodeVarInt(uint64_t v, Bytes& out, std::optional<uint8_t> forced_len) {
  if (v > VarInt::kMax) throw Error(Errc::kOverflow, "varint value " + std::to_string(v));
  uint8_t len = MinimalVarIntLength(v);
  if (forced_len) {
    if (*forced_len != 1 && *forced_len != 2 && *forced_len != 4 && *forced_len != 8) {
      throw Error(Errc::kInvalidArgument, "varint width " + std::to_string(*forced_len));
    }
    if (*forced_len < len) {
      throw Error(Errc::kLengthTooSmall,
                  std::to_string(v) + " in " + std::to_string(*forced_len) + " bytes");
    }
    len = *forced_len;
  }
  const uint8_t prefix = len == 1 ? 0x00 : len == 2 ? 0x40 : len == 4 ? 0x80 : 0xc0;
  for (int i = len - 1; i >= 0; --i) {
    uint8_t b = static_cast<uint8_t>(v >> (8 * i));
    if (i == len - 1) b |= prefix;
    out.push_back(b);
  }
}

Bytes EncodeVarInt(uint64_t v, std::optional<uint8_t> forced_len) {
  Bytes out;
  EncodeVarInt(v, out, forced_len);
  return out;
}

void EncodeVarIntPreferWidth(uint64_t value, uint8_t width, Bytes& out) {
  if (VarIntFits(value, width)) {
    EncodeVarInt(value, out, width);
  } else {
    EncodeVarInt(value, out);
  }
}

}  // namespace quicfuzz
