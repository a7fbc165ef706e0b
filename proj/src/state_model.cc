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

#include "quicfuzz/state_model.h"

#include <cstdio>
#include <sstream>

namespace quicfuzz {
namespace {

// Higher wins when choosing the frame that speaks for a packet.
int Priority(const Frame& f) {
  if (std::holds_alternative<ConnectionCloseFrame>(f)) return 8;
  if (std::holds_alternative<HandshakeDoneFrame>(f)) return 7;
  if (std::holds_alternative<CryptoFrame>(f)) return 6;
  if (std::holds_alternative<StreamFrame>(f)) return 5;
  if (std::holds_alternative<NewConnectionIdFrame>(f)) return 4;
  if (std::holds_alternative<AckFrame>(f)) return 3;
  if (std::holds_alternative<PingFrame>(f)) return 2;
  if (std::holds_alternative<RawFrame>(f)) return 1;
  return 0;
}

uint8_t Signal(const Frame& f) {
  if (std::holds_alternative<ConnectionCloseFrame>(f)) return frame_type::kConnectionCloseTransport;
  if (std::holds_alternative<StreamFrame>(f)) return frame_type::kStreamBase;
  if (std::holds_alternative<AckFrame>(f)) return frame_type::kAck;
  return static_cast<uint8_t>(FrameTypeOf(f));
}

// Last TLS handshake message type found walking the 4-byte headers.
int LastTlsMessage(const std::vector<Frame>& frames) {
  int last = -1;
  for (const Frame& f : frames) {
    const auto* c = std::get_if<CryptoFrame>(&f);
    if (!c) continue;
    size_t pos = 0;
    while (pos + 4 <= c->data.size()) {
      last = c->data[pos];
      const size_t len = size_t{c->data[pos + 1]} << 16 | size_t{c->data[pos + 2]} << 8 |
                         c->data[pos + 3];
      pos += 4 + len;
    }
  }
  return last;
}

uint8_t CloseBucket(const ConnectionCloseFrame& cc) {
  if (cc.type == frame_type::kConnectionCloseApplication) return close_bucket::kApplication;
  if (cc.error_code.value >= 0x100 && cc.error_code.value <= 0x1ff) return close_bucket::kCrypto;
  return close_bucket::kTransport;
}

}  // namespace

std::string FormatStateCode(StateCode code) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "0x%04x", code);
  return buf;
}

std::vector<ResponsePacket> DecodeResponses(std::span<const Bytes> datagrams,
                                            const SecretSet& secrets,
                                            size_t short_dcid_len) {
  std::vector<ResponsePacket> out;
  for (const Bytes& d : datagrams) {
    Datagram dg;
    try {
      dg = SplitDatagram(d, short_dcid_len);
    } catch (const Error&) {
      out.push_back(ResponsePacket{PacketType::kUnknownVersion, false, {}});
      continue;
    }
    for (const DatagramPacket& p : dg.packets) {
      ResponsePacket rp;
      rp.type = p.layout.header.type;
      if (LevelOf(rp.type)) {
        try {
          PlainPacket plain = Unprotect(ByteSpan(d).subspan(p.start, p.end - p.start), secrets,
                                        Direction::kServerToClient, short_dcid_len);
          rp.decrypted = plain.frames_parsed;
          rp.frames = std::move(plain.frames);
        } catch (const Error&) {
        }
      }
      out.push_back(std::move(rp));
    }
  }
  return out;
}

StateCode ClassifyPacket(const ResponsePacket& packet, bool rich) {
  uint8_t cls = packet_class::kOpaque;
  switch (packet.type) {
    case PacketType::kInitial: cls = packet_class::kInitial; break;
    case PacketType::kHandshake: cls = packet_class::kHandshake; break;
    case PacketType::kOneRtt: cls = packet_class::kOneRtt; break;
    case PacketType::kVersionNegotiation: return MakeStateCode(packet_class::kVersionNegotiation, 0, 0);
    default: return kOpaqueState;
  }
  if (!rich) return MakeStateCode(cls, 0, 0);
  if (!packet.decrypted || packet.frames.empty()) return kOpaqueState;

  const Frame* dominant = &packet.frames.front();
  for (const Frame& f : packet.frames) {
    if (Priority(f) > Priority(*dominant)) dominant = &f;
  }
  uint8_t detail = 0;
  if (const auto* cc = std::get_if<ConnectionCloseFrame>(dominant)) {
    detail = CloseBucket(*cc);
  } else if (std::holds_alternative<CryptoFrame>(*dominant)) {
    const int msg = LastTlsMessage(packet.frames);
    if (msg == 20) {
      detail = tls_detail::kFinished;
    } else if (msg >= 16) {
      detail = tls_detail::kOther;
    } else if (msg > 0) {
      detail = static_cast<uint8_t>(msg);
    }
  }
  return MakeStateCode(cls, Signal(*dominant), detail);
}

std::vector<StateCode> ExtractCodes(std::span<const ResponsePacket> packets, bool rich) {
  std::vector<StateCode> out;
  out.reserve(packets.size());
  for (const auto& p : packets) out.push_back(ClassifyPacket(p, rich));
  return out;
}

StateMachine::StateMachine() { nodes_[kStartState]; }

bool StateMachine::Update(std::span<const StateCode> codes) {
  const size_t before = size();
  StateCode prev = kStartState;
  nodes_[kStartState].hits++;
  for (StateCode c : codes) {
    nodes_[c].hits++;
    edges_[{prev, c}]++;
    prev = c;
  }
  return size() > before;
}

StateCode StateMachine::Select(const SelectionWeights& w) {
  StateCode best = kStartState;
  double best_score = -1;
  for (const auto& [code, stats] : nodes_) {
    if (code == kStartState) continue;
    const double score = w.fuzz_weight / (1.0 + static_cast<double>(stats.fuzz_count)) +
                         w.novelty_weight * stats.novelty;
    // Strict comparison over ascending codes keeps the lowest on ties.
    if (score > best_score) {
      best_score = score;
      best = code;
    }
  }
  if (best != kStartState) {
    nodes_[best].selections++;
    nodes_[best].novelty *= w.novelty_decay;
  }
  return best;
}

void StateMachine::MarkFuzzed(StateCode code) {
  auto it = nodes_.find(code);
  if (it != nodes_.end()) it->second.fuzz_count++;
}

std::string StateMachine::ExportEdges() const {
  std::ostringstream os;
  for (const auto& [edge, count] : edges_) {
    os << FormatStateCode(edge.first) << " -> " << FormatStateCode(edge.second) << " [" << count
       << "]\n";
  }
  return os.str();
}

}  // namespace quicfuzz
