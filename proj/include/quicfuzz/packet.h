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

// QUIC v1 packet headers and coalesced datagrams.
//
// Two byte images of a packet exist in this library. The wire image is what
// travels in a UDP datagram: masked first byte and packet number, payload
// encrypted, 16-byte AEAD tag appended. The plain image is the same header
// with the mask removed followed by the decrypted payload and no tag. The
// Length field of a plain image still describes the wire image.

#ifndef QUICFUZZ_PACKET_H_
#define QUICFUZZ_PACKET_H_

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "quicfuzz/common.h"
#include "quicfuzz/frame.h"
#include "quicfuzz/varint.h"

namespace quicfuzz {

inline constexpr uint32_t kQuicVersion1 = 0x00000001;
inline constexpr size_t kMaxCidLength = 20;
inline constexpr size_t kAeadTagLength = 16;
inline constexpr size_t kMinInitialDatagram = 1200;

enum class PacketType : uint8_t {
  kInitial,
  kZeroRtt,
  kHandshake,
  kRetry,
  kOneRtt,
  kVersionNegotiation,
  kUnknownVersion,
};

enum class EncryptionLevel : uint8_t { kInitial = 0, kHandshake = 1, kOneRtt = 2 };

std::string_view PacketTypeName(PacketType type);
std::string_view LevelName(EncryptionLevel level);

// Level whose keys protect `type`, or nullopt for packets that carry no
// AEAD payload in this library (Version Negotiation, Retry, 0-RTT, and
// packets of unknown versions).
std::optional<EncryptionLevel> LevelOf(PacketType type);

struct PacketHeader {
  uint8_t first_byte = 0;  // unmasked
  PacketType type = PacketType::kOneRtt;
  uint32_t version = 0;
  Bytes dcid;
  Bytes scid;
  VarInt token_length;
  Bytes token;
  VarInt length;  // long headers with a packet number
  uint64_t packet_number = 0;
  uint8_t pn_length = 1;
  // Everything after the connection ids of a packet this codec keeps opaque:
  // the version list of Version Negotiation, Retry token and tag, or the
  // remainder of an unknown-version packet.
  Bytes trailer;

  bool is_long() const { return first_byte & 0x80; }
  bool has_packet_number() const;

  bool operator==(const PacketHeader&) const = default;
};

struct HeaderLayout {
  PacketHeader header;
  size_t pn_offset = 0;
  // Plain images only: first payload byte. Equal to pn_offset on a wire image.
  size_t payload_offset = 0;
  // Wire images only: one past the last byte of this packet in the buffer.
  size_t packet_end = 0;
};

// Parses the header of a wire image. The packet number is still masked, so
// header.packet_number and header.pn_length are left at their defaults.
// Short headers need the DCID length from connection state.
HeaderLayout ParseHeader(ByteSpan bytes, size_t short_dcid_len);

// Parses the header of a plain image, reading the packet number at the
// length encoded in the low bits of the first byte.
HeaderLayout ParsePlainHeader(ByteSpan bytes, size_t short_dcid_len);

// Writes a plain-image header for a payload of `payload_len` bytes. The
// Length field is rewritten to pn_length + payload_len + kAeadTagLength and
// keeps its recorded width when the new value fits. The token length is
// recomputed the same way.
void SerializeHeader(const PacketHeader& header, size_t payload_len, Bytes& out);

Bytes SerializePlainPacket(const PacketHeader& header, ByteSpan payload);
Bytes SerializePacket(const PacketHeader& header, std::span<const Frame> frames);

// Size of the wire image for `header` carrying `payload_len` payload bytes.
size_t WireSize(const PacketHeader& header, size_t payload_len);

// Appends PADDING bytes to `payload` until the wire image, together with
// `other_bytes` of sibling packets in the same datagram, reaches `target`.
void PadToDatagram(const PacketHeader& header, Bytes& payload, size_t other_bytes,
                   size_t target);

struct DatagramPacket {
  HeaderLayout layout;  // offsets relative to `start`
  size_t start = 0;
  size_t end = 0;
};

struct Datagram {
  std::vector<DatagramPacket> packets;
  size_t trailing_padding = 0;
};

// Splits a wire datagram into its coalesced packets. Long headers end where
// their Length field says; a short header, a Version Negotiation packet or
// an unknown-version packet consumes the rest. Once at least one packet has
// been read, remaining bytes whose first byte has the fixed bit clear are
// counted as trailing padding.
Datagram SplitDatagram(ByteSpan bytes, size_t short_dcid_len);

void WritePacketNumber(uint64_t pn, uint8_t pn_length, Bytes& out);

}  // namespace quicfuzz

#endif  // QUICFUZZ_PACKET_H_
