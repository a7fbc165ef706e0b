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

// QUIC v1 frames used by the basic handshake. Everything else is carried as
// RawFrame so a parse/serialize cycle never drops bytes.

#ifndef QUICFUZZ_FRAME_H_
#define QUICFUZZ_FRAME_H_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "quicfuzz/common.h"
#include "quicfuzz/varint.h"

namespace quicfuzz {

namespace frame_type {
inline constexpr uint64_t kPadding = 0x00;
inline constexpr uint64_t kPing = 0x01;
inline constexpr uint64_t kAck = 0x02;
inline constexpr uint64_t kAckEcn = 0x03;
inline constexpr uint64_t kCrypto = 0x06;
inline constexpr uint64_t kStreamBase = 0x08;  // 0x08..0x0f
inline constexpr uint64_t kNewConnectionId = 0x18;
inline constexpr uint64_t kConnectionCloseTransport = 0x1c;
inline constexpr uint64_t kConnectionCloseApplication = 0x1d;
inline constexpr uint64_t kHandshakeDone = 0x1e;
}  // namespace frame_type

struct PaddingFrame {
  bool operator==(const PaddingFrame&) const = default;
};

struct PingFrame {
  bool operator==(const PingFrame&) const = default;
};

struct AckRange {
  VarInt gap;
  VarInt length;
  bool operator==(const AckRange&) const = default;
};

struct AckFrame {
  VarInt largest_acked;
  VarInt delay;
  VarInt range_count;  // must equal ranges.size() on the wire
  VarInt first_range;
  std::vector<AckRange> ranges;
  std::optional<std::array<VarInt, 3>> ecn_counts;  // present for type 0x03
  bool operator==(const AckFrame&) const = default;
};

struct CryptoFrame {
  VarInt offset;
  VarInt length;  // width is kept; value is recomputed from data on write
  Bytes data;
  bool operator==(const CryptoFrame&) const = default;
};

struct StreamFrame {
  uint8_t type = 0x08;  // low bits: 0x04 OFF, 0x02 LEN, 0x01 FIN
  VarInt stream_id;
  VarInt offset;  // meaningful only with OFF
  VarInt length;  // meaningful only with LEN
  Bytes data;

  bool has_offset() const { return type & 0x04; }
  bool has_length() const { return type & 0x02; }
  bool fin() const { return type & 0x01; }
  bool operator==(const StreamFrame&) const = default;
};

struct NewConnectionIdFrame {
  VarInt sequence;
  VarInt retire_prior_to;
  Bytes connection_id;  // 1..20 bytes on a valid wire image
  std::array<uint8_t, 16> reset_token{};
  bool operator==(const NewConnectionIdFrame&) const = default;
};

struct ConnectionCloseFrame {
  uint8_t type = 0x1c;
  VarInt error_code;
  VarInt frame_type;  // only on the wire for type 0x1c
  VarInt reason_length;
  Bytes reason;
  bool operator==(const ConnectionCloseFrame&) const = default;
};

struct HandshakeDoneFrame {
  bool operator==(const HandshakeDoneFrame&) const = default;
};

// A frame this codec does not model, or one whose type is not minimally
// encoded. The body runs to the end of the payload because its length is
// unknown.
struct RawFrame {
  VarInt type;
  Bytes body;
  bool operator==(const RawFrame&) const = default;
};

using Frame = std::variant<PaddingFrame, PingFrame, AckFrame, CryptoFrame,
                           StreamFrame, NewConnectionIdFrame,
                           ConnectionCloseFrame, HandshakeDoneFrame, RawFrame>;

// Parses every frame in a decrypted payload. Total over arbitrary input:
// either returns frames whose concatenated serialization equals `payload`,
// or throws Error(kTruncated | kMalformed). When `ends` is non-null it
// receives the end offset of each frame.
std::vector<Frame> ParseFrames(ByteSpan payload, std::vector<size_t>* ends = nullptr);

void SerializeFrame(const Frame& frame, Bytes& out);
Bytes SerializeFrames(std::span<const Frame> frames);

uint64_t FrameTypeOf(const Frame& frame);
bool IsAckEliciting(const Frame& frame);
std::string DescribeFrame(const Frame& frame);

// Convenience constructors with minimal varint widths.
CryptoFrame MakeCryptoFrame(uint64_t offset, Bytes data);
StreamFrame MakeStreamFrame(uint64_t stream_id, uint64_t offset, Bytes data, bool fin);
AckFrame MakeAckFrame(uint64_t largest, uint64_t first_range = 0, uint64_t delay = 0);
ConnectionCloseFrame MakeConnectionClose(uint64_t error_code, uint64_t frame_type,
                                         std::string_view reason,
                                         bool application = false);

}  // namespace quicfuzz

#endif  // QUICFUZZ_FRAME_H_
