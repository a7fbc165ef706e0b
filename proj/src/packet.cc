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

#include "quicfuzz/packet.h"

#include <string>

namespace quicfuzz {
namespace {

uint8_t Need(ByteSpan b, size_t pos) {
  if (pos >= b.size()) throw Error(Errc::kTruncated, "header ends at " + std::to_string(pos));
  return b[pos];
}

Bytes Take(ByteSpan b, size_t& pos, size_t n) {
  if (b.size() - pos < n || pos > b.size()) {
    throw Error(Errc::kTruncated, "header field of " + std::to_string(n) + " bytes");
  }
  Bytes out(b.begin() + pos, b.begin() + pos + n);
  pos += n;
  return out;
}

void ReadCid(ByteSpan b, size_t& pos, Bytes& cid, bool v1) {
  const uint8_t len = Need(b, pos++);
  if (v1 && len > kMaxCidLength) {
    throw Error(Errc::kMalformed, "connection id of " + std::to_string(len) + " bytes");
  }
  cid = Take(b, pos, len);
}

HeaderLayout ParseCommon(ByteSpan b, size_t short_dcid_len) {
  HeaderLayout out;
  PacketHeader& h = out.header;
  size_t pos = 0;
  h.first_byte = Need(b, pos++);
  if (!h.is_long()) {
    if ((h.first_byte & 0x40) == 0) throw Error(Errc::kMalformed, "fixed bit clear");
    h.type = PacketType::kOneRtt;
    h.dcid = Take(b, pos, short_dcid_len);
    out.pn_offset = pos;
    out.payload_offset = pos;
    out.packet_end = b.size();
    return out;
  }
  Bytes version = Take(b, pos, 4);
  h.version = uint32_t{version[0]} << 24 | uint32_t{version[1]} << 16 |
              uint32_t{version[2]} << 8 | version[3];
  const bool v1 = h.version == kQuicVersion1;
  ReadCid(b, pos, h.dcid, v1);
  ReadCid(b, pos, h.scid, v1);
  if (!v1) {
    h.type = h.version == 0 ? PacketType::kVersionNegotiation : PacketType::kUnknownVersion;
    h.trailer = Take(b, pos, b.size() - pos);
    out.pn_offset = out.payload_offset = out.packet_end = b.size();
    return out;
  }
  if ((h.first_byte & 0x40) == 0) throw Error(Errc::kMalformed, "fixed bit clear");
  switch ((h.first_byte >> 4) & 0x03) {
    case 0: h.type = PacketType::kInitial; break;
    case 1: h.type = PacketType::kZeroRtt; break;
    case 2: h.type = PacketType::kHandshake; break;
    default: h.type = PacketType::kRetry; break;
  }
  if (h.type == PacketType::kRetry) {
    h.trailer = Take(b, pos, b.size() - pos);
    out.pn_offset = out.payload_offset = out.packet_end = b.size();
    return out;
  }
  if (h.type == PacketType::kInitial) {
    auto [tl, used] = DecodeVarInt(b, pos);
    pos += used;
    h.token_length = tl;
    if (tl.value > b.size() - pos) throw Error(Errc::kTruncated, "token exceeds datagram");
    h.token = Take(b, pos, tl.value);
  }
  auto [len, used] = DecodeVarInt(b, pos);
  pos += used;
  h.length = len;
  out.pn_offset = pos;
  out.payload_offset = pos;
  if (len.value > b.size() - pos) {
    out.packet_end = SIZE_MAX;
  } else {
    out.packet_end = pos + len.value;
  }
  return out;
}

}  // namespace

std::string_view PacketTypeName(PacketType type) {
  switch (type) {
    case PacketType::kInitial: return "Initial";
    case PacketType::kZeroRtt: return "0-RTT";
    case PacketType::kHandshake: return "Handshake";
    case PacketType::kRetry: return "Retry";
    case PacketType::kOneRtt: return "1-RTT";
    case PacketType::kVersionNegotiation: return "VersionNegotiation";
    case PacketType::kUnknownVersion: return "UnknownVersion";
  }
  return "?";
}

std::string_view LevelName(EncryptionLevel level) {
  switch (level) {
    case EncryptionLevel::kInitial: return "Initial";
    case EncryptionLevel::kHandshake: return "Handshake";
    case EncryptionLevel::kOneRtt: return "1-RTT";
  }
  return "?";
}

std::optional<EncryptionLevel> LevelOf(PacketType type) {
  switch (type) {
    case PacketType::kInitial: return EncryptionLevel::kInitial;
    case PacketType::kHandshake: return EncryptionLevel::kHandshake;
    case PacketType::kOneRtt: return EncryptionLevel::kOneRtt;
    default: return std::nullopt;
  }
}

bool PacketHeader::has_packet_number() const {
  return type == PacketType::kInitial || type == PacketType::kZeroRtt ||
         type == PacketType::kHandshake || type == PacketType::kOneRtt;
}

HeaderLayout ParseHeader(ByteSpan bytes, size_t short_dcid_len) {
  HeaderLayout out = ParseCommon(bytes, short_dcid_len);
  if (out.packet_end == SIZE_MAX) throw Error(Errc::kTruncated, "length field exceeds datagram");
  if (out.header.has_packet_number() && out.header.is_long() &&
      out.header.length.value < 4 + kAeadTagLength) {
    // Too short to hold a sample for header protection.
    throw Error(Errc::kMalformed, "length field " + std::to_string(out.header.length.value));
  }
  return out;
}

HeaderLayout ParsePlainHeader(ByteSpan bytes, size_t short_dcid_len) {
  HeaderLayout out = ParseCommon(bytes, short_dcid_len);
  PacketHeader& h = out.header;
  out.packet_end = bytes.size();
  if (!h.has_packet_number()) return out;
  h.pn_length = (h.first_byte & 0x03) + 1;
  size_t pos = out.pn_offset;
  Bytes pn = Take(bytes, pos, h.pn_length);
  h.packet_number = 0;
  for (uint8_t byte : pn) h.packet_number = h.packet_number << 8 | byte;
  out.payload_offset = pos;
  return out;
}

void WritePacketNumber(uint64_t pn, uint8_t pn_length, Bytes& out) {
  for (int i = pn_length - 1; i >= 0; --i) out.push_back(static_cast<uint8_t>(pn >> (8 * i)));
}

void SerializeHeader(const PacketHeader& h, size_t payload_len, Bytes& out) {
  auto put_cid = [&out](const Bytes& cid) {
    if (cid.size() > 255) throw Error(Errc::kUnrepresentable, "connection id over 255 bytes");
    out.push_back(static_cast<uint8_t>(cid.size()));
    out.insert(out.end(), cid.begin(), cid.end());
  };
  if (!h.token.empty() && h.type != PacketType::kInitial) {
    throw Error(Errc::kUnrepresentable, "token on a non-Initial packet");
  }
  if (h.has_packet_number() && (h.pn_length < 1 || h.pn_length > 4)) {
    throw Error(Errc::kUnrepresentable, "packet number length " + std::to_string(h.pn_length));
  }
  if (!h.is_long()) {
    if (!h.scid.empty()) throw Error(Errc::kUnrepresentable, "source id on a short header");
    out.push_back(static_cast<uint8_t>((h.first_byte & ~0x03) | (h.pn_length - 1)));
    out.insert(out.end(), h.dcid.begin(), h.dcid.end());
    WritePacketNumber(h.packet_number, h.pn_length, out);
    return;
  }
  out.push_back(h.has_packet_number()
                    ? static_cast<uint8_t>((h.first_byte & ~0x03) | (h.pn_length - 1))
                    : h.first_byte);
  for (int i = 3; i >= 0; --i) out.push_back(static_cast<uint8_t>(h.version >> (8 * i)));
  put_cid(h.dcid);
  put_cid(h.scid);
  if (!h.has_packet_number()) {
    out.insert(out.end(), h.trailer.begin(), h.trailer.end());
    return;
  }
  if (h.type == PacketType::kInitial) {
    EncodeVarIntPreferWidth(h.token.size(), h.token_length.length, out);
    out.insert(out.end(), h.token.begin(), h.token.end());
  }
  const uint64_t length = h.pn_length + payload_len + kAeadTagLength;
  if (length > VarInt::kMax) throw Error(Errc::kUnrepresentable, "length field overflow");
  EncodeVarIntPreferWidth(length, h.length.length, out);
  WritePacketNumber(h.packet_number, h.pn_length, out);
}

Bytes SerializePlainPacket(const PacketHeader& header, ByteSpan payload) {
  Bytes out;
  SerializeHeader(header, payload.size(), out);
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

Bytes SerializePacket(const PacketHeader& header, std::span<const Frame> frames) {
  return SerializePlainPacket(header, SerializeFrames(frames));
}

size_t WireSize(const PacketHeader& header, size_t payload_len) {
  Bytes hdr;
  SerializeHeader(header, payload_len, hdr);
  return hdr.size() + payload_len + (header.has_packet_number() ? kAeadTagLength : 0);
}

void PadToDatagram(const PacketHeader& header, Bytes& payload, size_t other_bytes,
                   size_t target) {
  // The Length field may widen as padding grows, so settle iteratively.
  while (other_bytes + WireSize(header, payload.size()) < target) {
    const size_t missing = target - other_bytes - WireSize(header, payload.size());
    payload.insert(payload.end(), missing, 0x00);
  }
}

Datagram SplitDatagram(ByteSpan bytes, size_t short_dcid_len) {
  if (bytes.empty()) throw Error(Errc::kTruncated, "empty datagram");
  Datagram out;
  size_t pos = 0;
  while (pos < bytes.size()) {
    if (!out.packets.empty() && (bytes[pos] & 0x40) == 0) {
      out.trailing_padding = bytes.size() - pos;
      break;
    }
    ByteSpan rest = bytes.subspan(pos);
    DatagramPacket packet;
    packet.layout = ParseHeader(rest, short_dcid_len);
    packet.start = pos;
    packet.end = pos + packet.layout.packet_end;
    out.packets.push_back(std::move(packet));
    pos = out.packets.back().end;
  }
  return out;
}

}  // namespace quicfuzz
