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

#include "quicfuzz/frame.h"

#include <algorithm>
#include <sstream>

namespace quicfuzz {
namespace {

class Reader {
 public:
  explicit Reader(ByteSpan bytes) : bytes_(bytes) {}

  bool done() const { return pos_ >= bytes_.size(); }
  size_t pos() const { return pos_; }
  size_t remaining() const { return bytes_.size() - pos_; }

  VarInt ReadVarInt() {
    auto [v, used] = DecodeVarInt(bytes_, pos_);
    pos_ += used;
    return v;
  }

  uint8_t ReadU8() {
    if (done()) throw Error(Errc::kTruncated, "frame byte");
    return bytes_[pos_++];
  }

  Bytes ReadBytes(uint64_t n) {
    if (n > remaining()) {
      throw Error(Errc::kMalformed, "frame field of " + std::to_string(n) +
                                        " bytes exceeds payload");
    }
    Bytes out(bytes_.begin() + pos_, bytes_.begin() + pos_ + n);
    pos_ += n;
    return out;
  }

  Bytes ReadRest() { return ReadBytes(remaining()); }

 private:
  ByteSpan bytes_;
  size_t pos_ = 0;
};

Frame ParseOne(Reader& r) {
  const size_t type_start = r.pos();
  const VarInt type = r.ReadVarInt();
  if (type.length != 1) return RawFrame{type, r.ReadRest()};
  (void)type_start;
  switch (type.value) {
    case frame_type::kPadding:
      return PaddingFrame{};
    case frame_type::kPing:
      return PingFrame{};
    case frame_type::kAck:
    case frame_type::kAckEcn: {
      AckFrame ack;
      ack.largest_acked = r.ReadVarInt();
      ack.delay = r.ReadVarInt();
      ack.range_count = r.ReadVarInt();
      ack.first_range = r.ReadVarInt();
      // Each range takes at least two bytes; bound the loop by what is left.
      if (ack.range_count.value > r.remaining() / 2) {
        throw Error(Errc::kMalformed, "ack range count exceeds payload");
      }
      for (uint64_t i = 0; i < ack.range_count.value; ++i) {
        AckRange range;
        range.gap = r.ReadVarInt();
        range.length = r.ReadVarInt();
        ack.ranges.push_back(range);
      }
      if (type.value == frame_type::kAckEcn) {
        std::array<VarInt, 3> counts;
        for (auto& c : counts) c = r.ReadVarInt();
        ack.ecn_counts = counts;
      }
      return ack;
    }
    case frame_type::kCrypto: {
      CryptoFrame f;
      f.offset = r.ReadVarInt();
      f.length = r.ReadVarInt();
      f.data = r.ReadBytes(f.length.value);
      return f;
    }
    case frame_type::kNewConnectionId: {
      NewConnectionIdFrame f;
      f.sequence = r.ReadVarInt();
      f.retire_prior_to = r.ReadVarInt();
      const uint8_t cid_len = r.ReadU8();
      f.connection_id = r.ReadBytes(cid_len);
      Bytes token = r.ReadBytes(16);
      std::copy(token.begin(), token.end(), f.reset_token.begin());
      return f;
    }
    case frame_type::kConnectionCloseTransport:
    case frame_type::kConnectionCloseApplication: {
      ConnectionCloseFrame f;
      f.type = static_cast<uint8_t>(type.value);
      f.error_code = r.ReadVarInt();
      if (f.type == frame_type::kConnectionCloseTransport) f.frame_type = r.ReadVarInt();
      f.reason_length = r.ReadVarInt();
      f.reason = r.ReadBytes(f.reason_length.value);
      return f;
    }
    case frame_type::kHandshakeDone:
      return HandshakeDoneFrame{};
    default:
      break;
  }
  if (type.value >= 0x08 && type.value <= 0x0f) {
    StreamFrame f;
    f.type = static_cast<uint8_t>(type.value);
    f.stream_id = r.ReadVarInt();
    if (f.has_offset()) f.offset = r.ReadVarInt();
    if (f.has_length()) {
      f.length = r.ReadVarInt();
      f.data = r.ReadBytes(f.length.value);
    } else {
      f.data = r.ReadRest();
    }
    return f;
  }
  return RawFrame{type, r.ReadRest()};
}

struct Serializer {
  Bytes& out;

  void operator()(const PaddingFrame&) const { out.push_back(0x00); }
  void operator()(const PingFrame&) const { out.push_back(0x01); }
  void operator()(const AckFrame& f) const {
    out.push_back(f.ecn_counts ? 0x03 : 0x02);
    EncodeVarIntPreferWidth(f.largest_acked.value, f.largest_acked.length, out);
    EncodeVarIntPreferWidth(f.delay.value, f.delay.length, out);
    EncodeVarIntPreferWidth(f.ranges.size(), f.range_count.length, out);
    EncodeVarIntPreferWidth(f.first_range.value, f.first_range.length, out);
    for (const auto& r : f.ranges) {
      EncodeVarIntPreferWidth(r.gap.value, r.gap.length, out);
      EncodeVarIntPreferWidth(r.length.value, r.length.length, out);
    }
    if (f.ecn_counts) {
      for (const auto& c : *f.ecn_counts) EncodeVarIntPreferWidth(c.value, c.length, out);
    }
  }
  void operator()(const CryptoFrame& f) const {
    out.push_back(0x06);
    EncodeVarIntPreferWidth(f.offset.value, f.offset.length, out);
    EncodeVarIntPreferWidth(f.data.size(), f.length.length, out);
    out.insert(out.end(), f.data.begin(), f.data.end());
  }
  void operator()(const StreamFrame& f) const {
    out.push_back(f.type);
    EncodeVarIntPreferWidth(f.stream_id.value, f.stream_id.length, out);
    if (f.has_offset()) EncodeVarIntPreferWidth(f.offset.value, f.offset.length, out);
    if (f.has_length()) EncodeVarIntPreferWidth(f.data.size(), f.length.length, out);
    out.insert(out.end(), f.data.begin(), f.data.end());
  }
  void operator()(const NewConnectionIdFrame& f) const {
    if (f.connection_id.size() > 255) {
      throw Error(Errc::kUnrepresentable, "connection id longer than 255 bytes");
    }
    out.push_back(0x18);
    EncodeVarIntPreferWidth(f.sequence.value, f.sequence.length, out);
    EncodeVarIntPreferWidth(f.retire_prior_to.value, f.retire_prior_to.length, out);
    out.push_back(static_cast<uint8_t>(f.connection_id.size()));
    out.insert(out.end(), f.connection_id.begin(), f.connection_id.end());
    out.insert(out.end(), f.reset_token.begin(), f.reset_token.end());
  }
  void operator()(const ConnectionCloseFrame& f) const {
    out.push_back(f.type);
    EncodeVarIntPreferWidth(f.error_code.value, f.error_code.length, out);
    if (f.type == frame_type::kConnectionCloseTransport) {
      EncodeVarIntPreferWidth(f.frame_type.value, f.frame_type.length, out);
    }
    EncodeVarIntPreferWidth(f.reason.size(), f.reason_length.length, out);
    out.insert(out.end(), f.reason.begin(), f.reason.end());
  }
  void operator()(const HandshakeDoneFrame&) const { out.push_back(0x1e); }
  void operator()(const RawFrame& f) const {
    EncodeVarInt(f.type.value, out, f.type.length);
    out.insert(out.end(), f.body.begin(), f.body.end());
  }
};

}  // namespace

std::vector<Frame> ParseFrames(ByteSpan payload, std::vector<size_t>* ends) {
  std::vector<Frame> frames;
  Reader r(payload);
  if (ends) ends->clear();
  while (!r.done()) {
    frames.push_back(ParseOne(r));
    if (ends) ends->push_back(r.pos());
  }
  return frames;
}

void SerializeFrame(const Frame& frame, Bytes& out) { std::visit(Serializer{out}, frame); }

Bytes SerializeFrames(std::span<const Frame> frames) {
  Bytes out;
  for (const auto& f : frames) SerializeFrame(f, out);
  return out;
}

uint64_t FrameTypeOf(const Frame& frame) {
  struct {
    uint64_t operator()(const PaddingFrame&) const { return frame_type::kPadding; }
    uint64_t operator()(const PingFrame&) const { return frame_type::kPing; }
    uint64_t operator()(const AckFrame& f) const {
      return f.ecn_counts ? frame_type::kAckEcn : frame_type::kAck;
    }
    uint64_t operator()(const CryptoFrame&) const { return frame_type::kCrypto; }
    uint64_t operator()(const StreamFrame& f) const { return f.type; }
    uint64_t operator()(const NewConnectionIdFrame&) const {
      return frame_type::kNewConnectionId;
    }
    uint64_t operator()(const ConnectionCloseFrame& f) const { return f.type; }
    uint64_t operator()(const HandshakeDoneFrame&) const { return frame_type::kHandshakeDone; }
    uint64_t operator()(const RawFrame& f) const { return f.type.value; }
  } visitor;
  return std::visit(visitor, frame);
}

bool IsAckEliciting(const Frame& frame) {
  return !std::holds_alternative<PaddingFrame>(frame) &&
         !std::holds_alternative<AckFrame>(frame) &&
         !std::holds_alternative<ConnectionCloseFrame>(frame);
}

std::string DescribeFrame(const Frame& frame) {
  std::ostringstream os;
  if (const auto* f = std::get_if<AckFrame>(&frame)) {
    os << "ACK[" << f->largest_acked.value << "]";
  } else if (const auto* f = std::get_if<CryptoFrame>(&frame)) {
    os << "CRYPTO(off=" << f->offset.value << ", len=" << f->data.size() << ")";
  } else if (const auto* f = std::get_if<StreamFrame>(&frame)) {
    os << "STREAM(id=" << f->stream_id.value << ", len=" << f->data.size()
       << (f->fin() ? ", fin" : "") << ")";
  } else if (const auto* f = std::get_if<NewConnectionIdFrame>(&frame)) {
    os << "NEW_CONNECTION_ID(seq=" << f->sequence.value << ")";
  } else if (const auto* f = std::get_if<ConnectionCloseFrame>(&frame)) {
    os << "CONNECTION_CLOSE(0x" << std::hex << f->error_code.value << ")";
  } else if (std::holds_alternative<PaddingFrame>(frame)) {
    os << "PADDING";
  } else if (std::holds_alternative<PingFrame>(frame)) {
    os << "PING";
  } else if (std::holds_alternative<HandshakeDoneFrame>(frame)) {
    os << "HANDSHAKE_DONE";
  } else if (const auto* f = std::get_if<RawFrame>(&frame)) {
    os << "RAW(type=0x" << std::hex << f->type.value << std::dec
       << ", len=" << f->body.size() << ")";
  }
  return os.str();
}

CryptoFrame MakeCryptoFrame(uint64_t offset, Bytes data) {
  CryptoFrame f;
  f.offset = VarInt::Minimal(offset);
  f.length = VarInt::Minimal(data.size());
  f.data = std::move(data);
  return f;
}

StreamFrame MakeStreamFrame(uint64_t stream_id, uint64_t offset, Bytes data, bool fin) {
  StreamFrame f;
  f.type = static_cast<uint8_t>(0x08 | 0x02 | (offset ? 0x04 : 0) | (fin ? 0x01 : 0));
  f.stream_id = VarInt::Minimal(stream_id);
  f.offset = VarInt::Minimal(offset);
  f.length = VarInt::Minimal(data.size());
  f.data = std::move(data);
  return f;
}

AckFrame MakeAckFrame(uint64_t largest, uint64_t first_range, uint64_t delay) {
  AckFrame f;
  f.largest_acked = VarInt::Minimal(largest);
  f.delay = VarInt::Minimal(delay);
  f.range_count = VarInt::Minimal(0);
  f.first_range = VarInt::Minimal(first_range);
  return f;
}

ConnectionCloseFrame MakeConnectionClose(uint64_t error_code, uint64_t frame_type,
                                         std::string_view reason, bool application) {
  ConnectionCloseFrame f;
  f.type = application ? 0x1d : 0x1c;
  f.error_code = VarInt::Minimal(error_code);
  f.frame_type = VarInt::Minimal(frame_type);
  f.reason = ToBytes(reason);
  f.reason_length = VarInt::Minimal(f.reason.size());
  return f;
}

}  // namespace quicfuzz
