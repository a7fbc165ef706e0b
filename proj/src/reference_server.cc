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

#include "quicfuzz/reference_server.h"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <thread>

namespace quicfuzz {
namespace {

constexpr uint64_t kActiveCidLimit = 2;

namespace tls_alert {
constexpr uint64_t kUnexpectedMessage = 0x10a;
constexpr uint64_t kHandshakeFailure = 0x128;
constexpr uint64_t kIllegalParameter = 0x12f;
constexpr uint64_t kDecodeError = 0x132;
constexpr uint64_t kDecryptError = 0x133;
constexpr uint64_t kProtocolVersion = 0x146;
constexpr uint64_t kMissingExtension = 0x16d;
}  // namespace tls_alert

namespace tls_type {
constexpr uint8_t kClientHello = 1;
constexpr uint8_t kServerHello = 2;
constexpr uint8_t kEncryptedExtensions = 8;
constexpr uint8_t kCertificate = 11;
constexpr uint8_t kCertificateVerify = 15;
constexpr uint8_t kFinished = 20;
}  // namespace tls_type

// Coverage block for a label refined by a small value.
void Hit(CoverageMap& cov, std::string_view label, uint64_t value) {
  cov.Hit(static_cast<uint16_t>(BlockId(label) ^ ((value * 0x9e3779b1u) & 0xffff)));
}

Bytes Pattern(size_t n, uint8_t seed, uint8_t step) {
  Bytes b(n);
  for (size_t i = 0; i < n; ++i) b[i] = static_cast<uint8_t>(seed + step * i);
  return b;
}

void PutU16(Bytes& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

void PutU24(Bytes& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

void Append(Bytes& out, ByteSpan b) { out.insert(out.end(), b.begin(), b.end()); }

Bytes TlsMessage(uint8_t type, ByteSpan body) {
  Bytes m{type};
  PutU24(m, static_cast<uint32_t>(body.size()));
  Append(m, body);
  return m;
}

Bytes Extension(uint16_t type, ByteSpan body) {
  Bytes e;
  PutU16(e, type);
  PutU16(e, static_cast<uint16_t>(body.size()));
  Append(e, body);
  return e;
}

Bytes ServerHello(ByteSpan session_id) {
  Bytes b;
  PutU16(b, 0x0303);
  Append(b, Pattern(32, 0x5a, 3));
  b.push_back(static_cast<uint8_t>(session_id.size()));
  Append(b, session_id);
  PutU16(b, 0x1301);
  b.push_back(0);
  Bytes ext;
  Append(ext, Extension(0x002b, Bytes{0x03, 0x04}));
  Bytes ks;
  PutU16(ks, 0x001d);
  PutU16(ks, 32);
  Append(ks, Pattern(32, 0x21, 5));
  Append(ext, Extension(0x0033, ks));
  PutU16(b, static_cast<uint16_t>(ext.size()));
  Append(b, ext);
  return TlsMessage(tls_type::kServerHello, b);
}

Bytes TransportParam(uint64_t id, ByteSpan value) {
  Bytes p;
  EncodeVarInt(id, p);
  EncodeVarInt(value.size(), p);
  Append(p, value);
  return p;
}

Bytes EncryptedExtensions(ByteSpan original_dcid) {
  Bytes tp;
  Append(tp, TransportParam(0x00, original_dcid));
  Append(tp, TransportParam(0x04, EncodeVarInt(1 << 20)));
  Append(tp, TransportParam(0x06, EncodeVarInt(kStreamWindow)));
  Append(tp, TransportParam(0x08, EncodeVarInt(kStreamLimit)));
  Append(tp, TransportParam(0x0f, ServerConnectionId()));
  Bytes ext = Extension(0x0039, tp);
  Bytes b;
  PutU16(b, static_cast<uint16_t>(ext.size()));
  Append(b, ext);
  return TlsMessage(tls_type::kEncryptedExtensions, b);
}

Bytes CertificateMessage() {
  const Bytes cert = Pattern(96, 0x30, 11);
  Bytes entry;
  PutU24(entry, static_cast<uint32_t>(cert.size()));
  Append(entry, cert);
  PutU16(entry, 0);
  Bytes b{0};
  PutU24(b, static_cast<uint32_t>(entry.size()));
  Append(b, entry);
  return TlsMessage(tls_type::kCertificate, b);
}

Bytes CertificateVerifyMessage() {
  Bytes b;
  PutU16(b, 0x0804);
  PutU16(b, 64);
  Append(b, Pattern(64, 0x77, 13));
  return TlsMessage(tls_type::kCertificateVerify, b);
}

Bytes ServerFinishedMessage() { return TlsMessage(tls_type::kFinished, Pattern(32, 0xf0, 17)); }

std::string_view Trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Bounds-checked reader for TLS structures. Running off the end throws
// DecodeFailure.
struct DecodeFailure {};

class TlsReader {
 public:
  explicit TlsReader(ByteSpan b) : b_(b) {}
  uint64_t Int(size_t n) {
    Need(n);
    uint64_t v = 0;
    for (size_t i = 0; i < n; ++i) v = v << 8 | b_[pos_++];
    return v;
  }
  ByteSpan Take(size_t n) {
    Need(n);
    ByteSpan s = b_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  size_t remaining() const { return b_.size() - pos_; }

 private:
  void Need(size_t n) const {
    if (b_.size() - pos_ < n) throw DecodeFailure{};
  }
  ByteSpan b_;
  size_t pos_ = 0;
};

AckFrame AckFor(const std::set<uint64_t>& received) {
  const uint64_t largest = *received.rbegin();
  uint64_t first_range = 0;
  auto it = received.rbegin();
  for (uint64_t expect = largest; it != received.rend() && *it == expect; ++it, --expect) {
    if (*it != largest) ++first_range;
    if (expect == 0) break;
  }
  return MakeAckFrame(largest, first_range);
}

bool CarriesCrypto(const std::vector<Frame>& frames) {
  return std::any_of(frames.begin(), frames.end(),
                     [](const Frame& f) { return std::holds_alternative<CryptoFrame>(f); });
}

bool HasAckEliciting(const std::vector<Frame>& frames) {
  return std::any_of(frames.begin(), frames.end(), IsAckEliciting);
}

const SecretSet& StaticSecretSet() {
  static const SecretSet set = InstallSecrets(ReferenceSecrets());
  return set;
}

}  // namespace

const Bytes& ServerConnectionId() {
  static const Bytes cid = FromHex("5146757a7a535256");
  return cid;
}

const SecretsConfig& ReferenceSecrets() {
  static const SecretsConfig config = SecretsConfig::Parse(
      "hs_client=b8902ab5f9fe52fdec3aea54e9293e4b8eabf955fcd88536bf44b8b584f14982\n"
      "hs_server=88ad8d3b0986a71965a28d108b0f40ffffe629284a6028c80ddc5dc083b3f5d1\n"
      "rtt_client=a877e6b1e1b1e0a56c4a0e3f7e4d3d1a3b8d0d2a7d33a1b0c9e5f6a7b8c9d0e1\n"
      "rtt_server=4fa1c2d3e4f5061728394a5b6c7d8e9fa0b1c2d3e4f5061728394a5b6c7d8e9f\n");
  return config;
}

const Bytes& ClientFinishedData() {
  static const Bytes data = Pattern(32, 0xc1, 29);
  return data;
}

std::string_view ServerStateName(ServerState state) {
  switch (state) {
    case ServerState::kAwaitInitial: return "AwaitInitial";
    case ServerState::kHandshakeSent: return "HandshakeSent";
    case ServerState::kEstablished: return "Established";
    case ServerState::kDraining: return "Draining";
    case ServerState::kClosed: return "Closed";
  }
  return "?";
}

ServerConfig ServerConfig::Parse(std::string_view text) {
  ServerConfig c;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    std::string_view line = Trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(Errc::kMalformed, "manifest line without '=': " + std::string(line));
    }
    const std::string_view key = Trim(line.substr(0, eq));
    const std::string_view value = Trim(line.substr(eq + 1));
    if (key == "paradigm") {
      if (value == "rs") {
        c.paradigm = Paradigm::kReceiveSend;
      } else if (value == "rbs") {
        c.paradigm = Paradigm::kReceiveBreakSend;
      } else {
        throw Error(Errc::kInvalidArgument, "paradigm must be rs or rbs");
      }
    } else if (key == "init_delay_ms") {
      try {
        size_t used = 0;
        const unsigned long v = std::stoul(std::string(value), &used);
        if (used != value.size() || v > 600000) throw std::out_of_range("init_delay_ms");
        c.init_delay_ms = static_cast<uint32_t>(v);
      } catch (const std::exception&) {
        throw Error(Errc::kInvalidArgument, "bad init_delay_ms: " + std::string(value));
      }
    } else if (key == "bugs") {
      std::string_view rest = value;
      while (!rest.empty()) {
        const size_t comma = rest.find(',');
        const std::string_view item = Trim(rest.substr(0, comma));
        rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
        if (item.empty() || item == "none") continue;
        if (item == bug_id::kVersionNegotiation || item == "B_VN") {
          c.bug_vn = true;
        } else if (item == bug_id::kAckDrain || item == "B_DRAIN") {
          c.bug_drain = true;
        } else if (item == bug_id::kStreamNull || item == "B_STREAM") {
          c.bug_stream = true;
        } else {
          throw Error(Errc::kInvalidArgument, "unknown bug: " + std::string(item));
        }
      }
    } else {
      throw Error(Errc::kUnknownKey, "unknown manifest key: " + std::string(key));
    }
  }
  return c;
}

ServerConfig ServerConfig::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIoFailure, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return Parse(ss.str());
}

std::vector<std::string> ServerConfig::EnabledBugs() const {
  std::vector<std::string> bugs;
  if (bug_vn) bugs.emplace_back(bug_id::kVersionNegotiation);
  if (bug_drain) bugs.emplace_back(bug_id::kAckDrain);
  if (bug_stream) bugs.emplace_back(bug_id::kStreamNull);
  return bugs;
}

std::string ServerConfig::Serialize() const {
  std::string bugs;
  for (const auto& b : EnabledBugs()) bugs += (bugs.empty() ? "" : ",") + b;
  return "paradigm=" + std::string(ParadigmName(paradigm)) +
         "\ninit_delay_ms=" + std::to_string(init_delay_ms) +
         "\nbugs=" + (bugs.empty() ? "none" : bugs) + "\n";
}

ReferenceServer::ReferenceServer(ServerConfig config)
    : config_(config), keys_(StaticSecretSet()) {
  peer_cids_.insert(0);
}

void ReferenceServer::Initialize() {
  if (config_.init_delay_ms) {
    std::this_thread::sleep_for(std::chrono::milliseconds(config_.init_delay_ms));
  }
}

std::unique_ptr<TargetProgram> ReferenceServer::Clone() const {
  return std::make_unique<ReferenceServer>(*this);
}

void ReferenceServer::Serve(TargetIo& io, CoverageMap& coverage) {
  coverage.Hit("serve.enter");
  if (config_.paradigm == Paradigm::kReceiveSend) {
    while (true) {
      TargetIo::Received r = io.Receive();
      if (r.status == TargetIo::Status::kDone) break;
      if (r.status != TargetIo::Status::kData) continue;
      for (Bytes& out : HandleDatagram(r.data, coverage)) io.Send(std::move(out));
    }
  } else {
    while (true) {
      TargetIo::Received r = io.Receive();
      if (r.status == TargetIo::Status::kDone) break;
      if (r.status != TargetIo::Status::kData) continue;
      std::vector<Bytes> pending = HandleDatagram(r.data, coverage);
      bool done = false;
      while (true) {
        TargetIo::Received more = io.TryReceive();
        if (more.status == TargetIo::Status::kWouldBlock) break;
        if (more.status == TargetIo::Status::kDone) {
          done = true;
          break;
        }
        coverage.Hit("serve.batch");
        for (Bytes& out : HandleDatagram(more.data, coverage)) pending.push_back(std::move(out));
      }
      for (Bytes& out : pending) io.Send(std::move(out));
      if (done) break;
    }
  }
  coverage.Hit("serve.exit");
}

bool ReferenceServer::HasKeys(EncryptionLevel level) const {
  const LevelState& l = levels_[static_cast<size_t>(level)];
  if (l.discarded) return false;
  switch (level) {
    case EncryptionLevel::kInitial: return initial_keys_;
    case EncryptionLevel::kHandshake: return handshake_ready_;
    case EncryptionLevel::kOneRtt: return established_;
  }
  return false;
}

void ReferenceServer::DiscardKeys(EncryptionLevel level, CoverageMap& cov) {
  LevelState& l = Level(level);
  if (l.discarded) return;
  Hit(cov, "keys.discard", static_cast<uint64_t>(level));
  l.discarded = true;
  l.ack_pending = false;
  l.outgoing.clear();
  l.crypto_unacked.clear();
  l.crypto_queued = false;
}

std::vector<Bytes> ReferenceServer::HandleDatagram(ByteSpan datagram, CoverageMap& cov) {
  cov.Hit("dgram.recv");
  if (state_ == ServerState::kClosed) {
    cov.Hit("dgram.closed");
    return {};
  }
  Datagram split;
  try {
    split = SplitDatagram(datagram, kServerCidLength);
  } catch (const Error& e) {
    Hit(cov, "dgram.split_fail", static_cast<uint64_t>(e.code()));
    return {};
  }
  if (split.trailing_padding) cov.Hit("dgram.trailing_padding");
  Hit(cov, "dgram.packets", std::min<size_t>(split.packets.size(), 4));
  std::vector<Bytes> immediate;
  for (size_t i = 0; i < split.packets.size(); ++i) {
    if (state_ == ServerState::kClosed) break;
    HandlePacket(datagram, split.packets[i], i == 0, cov, immediate);
  }
  if (!immediate.empty()) return immediate;
  return Flush(cov);
}

void ReferenceServer::HandlePacket(ByteSpan datagram, const DatagramPacket& packet, bool first,
                                   CoverageMap& cov, std::vector<Bytes>& immediate) {
  const PacketHeader& h = packet.layout.header;
  const ByteSpan bytes = datagram.subspan(packet.start, packet.end - packet.start);
  Hit(cov, "pkt.type", static_cast<uint64_t>(h.type));
  switch (h.type) {
    case PacketType::kVersionNegotiation:
      cov.Hit("pkt.vn_from_client");
      return;
    case PacketType::kRetry:
      cov.Hit("pkt.retry_from_client");
      return;
    case PacketType::kZeroRtt:
      cov.Hit("pkt.zero_rtt");
      return;
    case PacketType::kUnknownVersion: {
      if (!first || state_ != ServerState::kAwaitInitial) {
        cov.Hit("vn.not_first");
        return;
      }
      if (datagram.size() < kMinInitialDatagram) {
        cov.Hit("vn.small_datagram");
        return;
      }
      cov.Hit("vn.emit");
      Bytes vn{0x80, 0, 0, 0, 0};
      vn[0] |= static_cast<uint8_t>(h.first_byte & 0x7f);
      vn.push_back(static_cast<uint8_t>(h.scid.size()));
      Append(vn, h.scid);
      vn.push_back(static_cast<uint8_t>(h.dcid.size()));
      Append(vn, h.dcid);
      vn.insert(vn.end(), {0, 0, 0, 1});
      if (config_.bug_vn) {
        cov.Hit("vn.log");
        throw TargetCrash{std::string(bug_id::kVersionNegotiation)};
      }
      immediate.push_back(std::move(vn));
      return;
    }
    default:
      break;
  }

  const EncryptionLevel level = *LevelOf(h.type);
  const SecretSet* keys = &keys_;
  SecretSet tentative;
  if (level == EncryptionLevel::kInitial) {
    if (datagram.size() < kMinInitialDatagram) {
      cov.Hit("initial.small_datagram");
      return;
    }
    if (Level(level).discarded) {
      cov.Hit("initial.after_discard");
      return;
    }
    if (!initial_keys_) {
      if (h.dcid.size() < kServerCidLength) {
        cov.Hit("initial.short_dcid");
        return;
      }
      if (!h.token.empty()) cov.Hit("initial.token");
      tentative = WithInitialSecrets(keys_, h.dcid);
      keys = &tentative;
    }
  } else if (!HasKeys(level)) {
    Hit(cov, "pkt.no_keys", static_cast<uint64_t>(level));
    return;
  }

  PlainPacket plain;
  try {
    plain = Unprotect(bytes, *keys, Direction::kClientToServer, kServerCidLength);
  } catch (const Error& e) {
    Hit(cov, "aead.fail", static_cast<uint64_t>(level) << 8 | static_cast<uint64_t>(e.code()));
    return;
  }
  Hit(cov, "aead.ok", static_cast<uint64_t>(level));
  if (keys == &tentative) {
    cov.Hit("initial.keys_commit");
    keys_ = std::move(tentative);
    initial_keys_ = true;
    original_dcid_ = h.dcid;
    client_scid_ = h.scid;
  }

  LevelState& l = Level(level);
  if (!l.received.insert(plain.packet_number()).second) {
    Hit(cov, "pn.duplicate", static_cast<uint64_t>(level));
    return;
  }
  if (plain.packet_number() > 0 && !l.received.count(plain.packet_number() - 1)) {
    Hit(cov, "pn.gap", static_cast<uint64_t>(level));
  }
  if (level == EncryptionLevel::kHandshake) DiscardKeys(EncryptionLevel::kInitial, cov);

  try {
    if (!plain.frames_parsed) {
      throw ConnectionError{transport_error::kFrameEncoding, 0, "frame decode failed"};
    }
    if (plain.frames.empty()) {
      throw ConnectionError{transport_error::kProtocolViolation, 0, "packet without frames"};
    }
    if (state_ == ServerState::kDraining) {
      HandleDrainingFrames(plain, cov);
    } else {
      HandleFrames(plain, cov);
    }
  } catch (const ConnectionError& e) {
    Close(e, cov);
  }
}

void ReferenceServer::HandleFrames(const PlainPacket& packet, CoverageMap& cov) {
  const EncryptionLevel level = packet.level;
  const bool handshake_space = level != EncryptionLevel::kOneRtt;
  bool eliciting = false;
  bool previous_padding = false;
  for (const Frame& frame : packet.frames) {
    if (state_ == ServerState::kDraining || state_ == ServerState::kClosed) return;
    const uint64_t type = FrameTypeOf(frame);
    const bool padding = std::holds_alternative<PaddingFrame>(frame);
    if (!padding || !previous_padding) Hit(cov, "frame", static_cast<uint64_t>(level) << 8 | type);
    previous_padding = padding;
    eliciting = eliciting || IsAckEliciting(frame);
    if (const auto* ack = std::get_if<AckFrame>(&frame)) {
      HandleAck(*ack, level, cov);
    } else if (const auto* crypto = std::get_if<CryptoFrame>(&frame)) {
      HandleCrypto(*crypto, level, cov);
    } else if (const auto* stream = std::get_if<StreamFrame>(&frame)) {
      if (handshake_space) {
        throw ConnectionError{transport_error::kProtocolViolation, type, "stream in handshake space"};
      }
      HandleStream(*stream, cov);
    } else if (const auto* ncid = std::get_if<NewConnectionIdFrame>(&frame)) {
      if (handshake_space) {
        throw ConnectionError{transport_error::kProtocolViolation, type, "ncid in handshake space"};
      }
      HandleNewConnectionId(*ncid, cov);
    } else if (const auto* cc = std::get_if<ConnectionCloseFrame>(&frame)) {
      if (handshake_space && cc->type == frame_type::kConnectionCloseApplication) {
        throw ConnectionError{transport_error::kProtocolViolation, type, "application close in handshake space"};
      }
      Hit(cov, "peer_close", std::min<uint64_t>(cc->error_code.value, 0x200));
      state_ = ServerState::kDraining;
      for (LevelState& l : levels_) {
        l.outgoing.clear();
        l.ack_pending = false;
      }
      return;
    } else if (std::holds_alternative<HandshakeDoneFrame>(frame)) {
      throw ConnectionError{transport_error::kProtocolViolation, type, "handshake_done from client"};
    } else if (const auto* raw = std::get_if<RawFrame>(&frame)) {
      if (raw->type.length != 1 || raw->type.value > frame_type::kHandshakeDone) {
        Hit(cov, "frame.unknown", std::min<uint64_t>(raw->type.value, 0x40));
        throw ConnectionError{transport_error::kFrameEncoding, raw->type.value, "unknown frame"};
      }
      if (handshake_space || raw->type.value == 0x07) {
        throw ConnectionError{transport_error::kProtocolViolation, raw->type.value,
                              "frame not allowed here"};
      }
      Hit(cov, "frame.unmodeled", raw->type.value);
      break;
    }
  }
  if (state_ == ServerState::kDraining || state_ == ServerState::kClosed) return;
  if (eliciting && HasKeys(level)) {
    Hit(cov, "ack.schedule", static_cast<uint64_t>(level));
    Level(level).ack_pending = true;
  }
}

void ReferenceServer::HandleDrainingFrames(const PlainPacket& packet, CoverageMap& cov) {
  Hit(cov, "drain.packet", static_cast<uint64_t>(packet.level));
  for (const Frame& frame : packet.frames) {
    if (!std::holds_alternative<AckFrame>(frame)) {
      if (!std::holds_alternative<PaddingFrame>(frame)) Hit(cov, "drain.frame", FrameTypeOf(frame));
      continue;
    }
    cov.Hit("drain.ack");
    bool outstanding = false;
    for (const LevelState& l : levels_) {
      if (!l.discarded && (l.crypto_queued || !l.crypto_unacked.empty())) outstanding = true;
    }
    if (!outstanding) {
      cov.Hit("drain.ack_clean");
      continue;
    }
    cov.Hit("drain.ack_outstanding");
    if (config_.bug_drain) throw TargetCrash{std::string(bug_id::kAckDrain)};
  }
}

void ReferenceServer::HandleAck(const AckFrame& ack, EncryptionLevel level, CoverageMap& cov) {
  LevelState& l = Level(level);
  const uint64_t type = ack.ecn_counts ? frame_type::kAckEcn : frame_type::kAck;
  if (ack.ecn_counts) cov.Hit("ack.ecn");
  if (ack.largest_acked.value >= l.next_pn) {
    Hit(cov, "ack.unsent", static_cast<uint64_t>(level));
    throw ConnectionError{transport_error::kProtocolViolation, type, "ack of unsent packet"};
  }
  if (ack.first_range.value > ack.largest_acked.value) {
    throw ConnectionError{transport_error::kFrameEncoding, type, "ack range underflow"};
  }
  const bool had_unacked = !l.crypto_unacked.empty();
  auto acknowledge = [&](uint64_t lo, uint64_t hi) {
    for (auto it = l.crypto_unacked.lower_bound(lo); it != l.crypto_unacked.end() && *it <= hi;) {
      it = l.crypto_unacked.erase(it);
    }
  };
  uint64_t lo = ack.largest_acked.value - ack.first_range.value;
  acknowledge(lo, ack.largest_acked.value);
  for (const AckRange& r : ack.ranges) {
    if (lo < r.gap.value + 2) {
      throw ConnectionError{transport_error::kFrameEncoding, type, "ack gap underflow"};
    }
    const uint64_t hi = lo - r.gap.value - 2;
    if (hi < r.length.value) {
      throw ConnectionError{transport_error::kFrameEncoding, type, "ack range underflow"};
    }
    lo = hi - r.length.value;
    acknowledge(lo, hi);
  }
  Hit(cov, "ack.ranges", std::min<size_t>(ack.ranges.size(), 3));
  if (had_unacked && l.crypto_unacked.empty()) Hit(cov, "ack.crypto_done", static_cast<uint64_t>(level));
}

void ReferenceServer::HandleCrypto(const CryptoFrame& frame, EncryptionLevel level,
                                   CoverageMap& cov) {
  LevelState& l = Level(level);
  const uint64_t offset = frame.offset.value;
  const uint64_t end = offset + frame.data.size();
  if (end > kCryptoBufferLimit) {
    Hit(cov, "crypto.overflow", static_cast<uint64_t>(level));
    throw ConnectionError{transport_error::kCryptoBufferExceeded, frame_type::kCrypto,
                          "crypto buffer exceeded"};
  }
  if (end <= l.crypto_read) {
    Hit(cov, "crypto.duplicate", static_cast<uint64_t>(level));
    return;
  }
  if (offset > l.crypto_read) {
    Hit(cov, "crypto.out_of_order", static_cast<uint64_t>(level));
    Bytes& slot = l.crypto_pending[offset];
    if (frame.data.size() > slot.size()) slot = frame.data;
    return;
  }
  auto consume = [&l](uint64_t off, const Bytes& data) {
    const uint64_t skip = l.crypto_read - off;
    l.crypto_messages.insert(l.crypto_messages.end(), data.begin() + static_cast<ptrdiff_t>(skip),
                             data.end());
    l.crypto_read = off + data.size();
  };
  consume(offset, frame.data);
  while (!l.crypto_pending.empty() && l.crypto_pending.begin()->first <= l.crypto_read) {
    auto node = l.crypto_pending.extract(l.crypto_pending.begin());
    if (node.key() + node.mapped().size() > l.crypto_read) {
      cov.Hit("crypto.reassembled");
      consume(node.key(), node.mapped());
    }
  }
  while (l.crypto_messages.size() >= 4) {
    const uint8_t type = l.crypto_messages[0];
    const size_t len = size_t{l.crypto_messages[1]} << 16 | size_t{l.crypto_messages[2]} << 8 |
                       l.crypto_messages[3];
    if (l.crypto_messages.size() < 4 + len) {
      Hit(cov, "tls.partial", static_cast<uint64_t>(level));
      break;
    }
    const Bytes body(l.crypto_messages.begin() + 4,
                     l.crypto_messages.begin() + 4 + static_cast<ptrdiff_t>(len));
    l.crypto_messages.erase(l.crypto_messages.begin(),
                            l.crypto_messages.begin() + 4 + static_cast<ptrdiff_t>(len));
    HandleTlsMessage(type, body, level, cov);
    if (state_ == ServerState::kDraining || state_ == ServerState::kClosed) return;
  }
}

void ReferenceServer::HandleTlsMessage(uint8_t type, ByteSpan body, EncryptionLevel level,
                                       CoverageMap& cov) {
  Hit(cov, "tls.msg", static_cast<uint64_t>(level) << 8 | type);
  if (level == EncryptionLevel::kInitial && type == tls_type::kClientHello &&
      state_ == ServerState::kAwaitInitial) {
    HandleClientHello(body, cov);
    return;
  }
  if (level == EncryptionLevel::kHandshake && type == tls_type::kFinished &&
      state_ == ServerState::kHandshakeSent) {
    HandleClientFinished(body, cov);
    return;
  }
  throw ConnectionError{tls_alert::kUnexpectedMessage, frame_type::kCrypto, "unexpected message"};
}

void ReferenceServer::HandleClientHello(ByteSpan body, CoverageMap& cov) {
  cov.Hit("ch.enter");
  Bytes session_id;
  bool supported_versions = false;
  bool tls13 = false;
  bool key_share = false;
  bool transport_params = false;
  try {
    TlsReader r(body);
    if (r.Int(2) != 0x0303) {
      cov.Hit("ch.legacy_version");
      throw ConnectionError{tls_alert::kProtocolVersion, frame_type::kCrypto, "legacy_version"};
    }
    r.Take(32);
    const size_t sid_len = r.Int(1);
    if (sid_len > 32) {
      cov.Hit("ch.session_id_long");
      throw ConnectionError{tls_alert::kIllegalParameter, frame_type::kCrypto, "session id"};
    }
    const ByteSpan sid = r.Take(sid_len);
    session_id.assign(sid.begin(), sid.end());
    if (sid_len) cov.Hit("ch.session_id");
    const size_t cs_len = r.Int(2);
    if (cs_len == 0 || cs_len % 2) {
      cov.Hit("ch.cipher_len");
      throw ConnectionError{tls_alert::kDecodeError, frame_type::kCrypto, "cipher suites"};
    }
    TlsReader cs(r.Take(cs_len));
    bool aes128 = false;
    while (cs.remaining()) {
      const uint64_t suite = cs.Int(2);
      if (suite == 0x1301) aes128 = true;
      if ((suite & 0x0f0f) == 0x0a0a) cov.Hit("ch.cipher_grease");
    }
    if (!aes128) {
      cov.Hit("ch.no_aes128");
      throw ConnectionError{tls_alert::kHandshakeFailure, frame_type::kCrypto, "no cipher"};
    }
    const size_t comp_len = r.Int(1);
    const ByteSpan comp = r.Take(comp_len);
    if (comp_len != 1 || comp[0] != 0) {
      cov.Hit("ch.compression");
      throw ConnectionError{tls_alert::kIllegalParameter, frame_type::kCrypto, "compression"};
    }
    const size_t ext_len = r.Int(2);
    if (ext_len != r.remaining()) {
      cov.Hit("ch.ext_len");
      throw ConnectionError{tls_alert::kDecodeError, frame_type::kCrypto, "extensions length"};
    }
    std::set<uint64_t> seen;
    while (r.remaining()) {
      const uint64_t ext = r.Int(2);
      TlsReader data(r.Take(r.Int(2)));
      if (!seen.insert(ext).second) {
        Hit(cov, "ch.ext_dup", ext & 0xff);
        throw ConnectionError{tls_alert::kIllegalParameter, frame_type::kCrypto, "duplicate extension"};
      }
      Hit(cov, "ch.ext", (ext & 0x0f0f) == 0x0a0a ? 0x0a0a : std::min<uint64_t>(ext, 0x100));
      switch (ext) {
        case 0x002b: {
          supported_versions = true;
          TlsReader list(data.Take(data.Int(1)));
          if (data.remaining()) throw DecodeFailure{};
          while (list.remaining()) {
            if (list.Int(2) == 0x0304) tls13 = true;
          }
          break;
        }
        case 0x0033: {
          const size_t shares = data.Int(2);
          if (shares != data.remaining()) throw DecodeFailure{};
          while (data.remaining()) {
            const uint64_t group = data.Int(2);
            data.Take(data.Int(2));
            Hit(cov, "ch.key_share", group == 0x001d ? 1 : group == 0x0017 ? 2 : 3);
          }
          key_share = true;
          break;
        }
        case 0x0039:
          CheckTransportParameters(data.Take(data.remaining()), cov);
          transport_params = true;
          break;
        default:
          break;
      }
    }
  } catch (const DecodeFailure&) {
    cov.Hit("ch.decode_error");
    throw ConnectionError{tls_alert::kDecodeError, frame_type::kCrypto, "client hello truncated"};
  }
  if (!supported_versions || !key_share || !transport_params) {
    Hit(cov, "ch.missing", supported_versions | key_share << 1 | transport_params << 2);
    throw ConnectionError{tls_alert::kMissingExtension, frame_type::kCrypto, "missing extension"};
  }
  if (!tls13) {
    cov.Hit("ch.no_tls13");
    throw ConnectionError{tls_alert::kProtocolVersion, frame_type::kCrypto, "no tls 1.3"};
  }
  cov.Hit("ch.accept");
  QueueServerFlight(session_id);
  state_ = ServerState::kHandshakeSent;
}

void ReferenceServer::CheckTransportParameters(ByteSpan params, CoverageMap& cov) {
  auto fail = [&](std::string reason) {
    cov.Hit("tp.error");
    return ConnectionError{transport_error::kTransportParameter, frame_type::kCrypto,
                           std::move(reason)};
  };
  std::set<uint64_t> seen;
  bool iscid = false;
  size_t pos = 0;
  while (pos < params.size()) {
    uint64_t id = 0;
    uint64_t len = 0;
    try {
      auto [idv, n1] = DecodeVarInt(params, pos);
      pos += n1;
      auto [lenv, n2] = DecodeVarInt(params, pos);
      pos += n2;
      id = idv.value;
      len = lenv.value;
    } catch (const Error&) {
      throw fail("truncated parameter header");
    }
    if (len > params.size() - pos) throw fail("parameter overruns");
    const ByteSpan value = params.subspan(pos, len);
    pos += len;
    if (!seen.insert(id).second) throw fail("duplicate parameter");
    const bool grease = id >= 27 && (id - 27) % 31 == 0;
    Hit(cov, "tp.id", grease ? 0xff : std::min<uint64_t>(id, 0x40));
    switch (id) {
      case 0x00:
      case 0x02:
      case 0x0d:
      case 0x10:
        throw fail("server-only parameter");
      case 0x0c:
        if (!value.empty()) throw fail("disable_active_migration has a value");
        break;
      case 0x0f:
        if (value.size() > kMaxCidLength) throw fail("initial_source_connection_id too long");
        iscid = true;
        break;
      case 0x01:
      case 0x03:
      case 0x04:
      case 0x05:
      case 0x06:
      case 0x07:
      case 0x08:
      case 0x09:
      case 0x0a:
      case 0x0b:
      case 0x0e: {
        uint64_t v = 0;
        try {
          if (value.empty()) throw fail("empty integer parameter");
          auto [vi, n] = DecodeVarInt(value, 0);
          if (n != value.size()) throw fail("integer parameter length");
          v = vi.value;
        } catch (const Error&) {
          throw fail("integer parameter truncated");
        }
        if (id == 0x03 && v < kMinInitialDatagram) throw fail("max_udp_payload_size");
        if (id == 0x0a && v > 20) throw fail("ack_delay_exponent");
        if (id == 0x0b && v >= (uint64_t{1} << 14)) throw fail("max_ack_delay");
        if (id == 0x0e && v < 2) throw fail("active_connection_id_limit");
        if ((id == 0x08 || id == 0x09) && v > (uint64_t{1} << 60)) throw fail("max_streams");
        break;
      }
      default:
        break;
    }
  }
  if (!iscid) throw fail("initial_source_connection_id missing");
  cov.Hit("tp.accept");
}

void ReferenceServer::HandleClientFinished(ByteSpan body, CoverageMap& cov) {
  if (body.size() != ClientFinishedData().size()) {
    cov.Hit("fin.length");
    throw ConnectionError{tls_alert::kDecodeError, frame_type::kCrypto, "finished length"};
  }
  if (!std::equal(body.begin(), body.end(), ClientFinishedData().begin())) {
    cov.Hit("fin.mismatch");
    throw ConnectionError{tls_alert::kDecryptError, frame_type::kCrypto, "finished mismatch"};
  }
  cov.Hit("fin.accept");
  state_ = ServerState::kEstablished;
  established_ = true;
  Level(EncryptionLevel::kOneRtt).outgoing.push_back(HandshakeDoneFrame{});
  DiscardKeys(EncryptionLevel::kHandshake, cov);
}

void ReferenceServer::HandleStream(const StreamFrame& frame, CoverageMap& cov) {
  const uint64_t id = frame.stream_id.value;
  auto it = streams_.find(id);
  if (it == streams_.end()) {
    const bool openable = id % 4 == 0 && id / 4 < kStreamLimit;
    if (!openable) {
      Hit(cov, "stream.unknown", id % 4);
      if (config_.bug_stream) throw TargetCrash{std::string(bug_id::kStreamNull)};
      const bool server_initiated = id & 1;
      throw ConnectionError{server_initiated ? transport_error::kStreamState
                                             : transport_error::kStreamLimit,
                            frame.type, "stream not in table"};
    }
    Hit(cov, "stream.open", id / 4);
    it = streams_.emplace(id, StreamState{}).first;
  }
  StreamState& s = it->second;
  const uint64_t offset = frame.has_offset() ? frame.offset.value : 0;
  const uint64_t end = offset + frame.data.size();
  Hit(cov, "stream.frame", frame.type & 0x07);
  if (end > kStreamWindow) {
    cov.Hit("stream.flow");
    throw ConnectionError{transport_error::kFlowControl, frame.type, "stream window exceeded"};
  }
  if (s.final_size && (end > *s.final_size || (frame.fin() && end != *s.final_size))) {
    cov.Hit("stream.final_changed");
    throw ConnectionError{transport_error::kFinalSize, frame.type, "final size changed"};
  }
  if (frame.fin()) {
    if (end < s.data.size()) {
      cov.Hit("stream.final_below");
      throw ConnectionError{transport_error::kFinalSize, frame.type, "final size below data"};
    }
    s.final_size = end;
  }
  if (end > s.data.size()) {
    s.data.resize(end);
    s.have.resize(end, false);
  }
  std::copy(frame.data.begin(), frame.data.end(), s.data.begin() + static_cast<ptrdiff_t>(offset));
  std::fill(s.have.begin() + static_cast<ptrdiff_t>(offset),
            s.have.begin() + static_cast<ptrdiff_t>(end), true);
  while (s.contiguous < s.have.size() && s.have[s.contiguous]) ++s.contiguous;
  if (s.answered) {
    cov.Hit("stream.after_answer");
    return;
  }
  const std::string_view text(reinterpret_cast<const char*>(s.data.data()), s.contiguous);
  const size_t eol = text.find("\r\n");
  const bool complete = s.final_size && s.contiguous == *s.final_size;
  if (eol == std::string_view::npos && !complete) {
    cov.Hit("stream.partial");
    return;
  }
  const std::string_view line = text.substr(0, eol);
  std::string response;
  if (line == "GET /index.html") {
    cov.Hit("http.ok");
    response = "<html><body>quicfuzz reference server</body></html>\n";
  } else if (line.substr(0, 4) == "GET ") {
    cov.Hit("http.not_found");
    response = "404 not found\n";
  } else {
    cov.Hit("http.bad_request");
    response = "400 bad request\n";
  }
  s.answered = true;
  Level(EncryptionLevel::kOneRtt).outgoing.push_back(MakeStreamFrame(id, 0, ToBytes(response), true));
}

void ReferenceServer::HandleNewConnectionId(const NewConnectionIdFrame& frame, CoverageMap& cov) {
  if (frame.connection_id.empty() || frame.connection_id.size() > kMaxCidLength) {
    cov.Hit("ncid.length");
    throw ConnectionError{transport_error::kFrameEncoding, frame_type::kNewConnectionId,
                          "connection id length"};
  }
  if (frame.retire_prior_to.value > frame.sequence.value) {
    cov.Hit("ncid.retire");
    throw ConnectionError{transport_error::kFrameEncoding, frame_type::kNewConnectionId,
                          "retire_prior_to above sequence"};
  }
  peer_cids_.insert(frame.sequence.value);
  const size_t before = peer_cids_.size();
  peer_cids_.erase(peer_cids_.begin(), peer_cids_.lower_bound(frame.retire_prior_to.value));
  if (peer_cids_.size() != before) cov.Hit("ncid.retired");
  if (peer_cids_.size() > kActiveCidLimit) {
    cov.Hit("ncid.limit");
    throw ConnectionError{transport_error::kConnectionIdLimit, frame_type::kNewConnectionId,
                          "too many connection ids"};
  }
  Hit(cov, "ncid.accept", std::min<uint64_t>(frame.sequence.value, 8));
}

void ReferenceServer::Close(const ConnectionError& error, CoverageMap& cov) {
  Hit(cov, "close", error.code);
  for (LevelState& l : levels_) {
    l.outgoing.clear();
    l.ack_pending = false;
  }
  std::optional<EncryptionLevel> level;
  for (EncryptionLevel lv :
       {EncryptionLevel::kOneRtt, EncryptionLevel::kHandshake, EncryptionLevel::kInitial}) {
    if (HasKeys(lv)) {
      level = lv;
      break;
    }
  }
  if (level) {
    Level(*level).outgoing.push_back(
        MakeConnectionClose(error.code, error.frame_type, error.reason));
  }
  state_ = ServerState::kClosed;
}

void ReferenceServer::QueueServerFlight(ByteSpan session_id) {
  handshake_ready_ = true;
  LevelState& initial = Level(EncryptionLevel::kInitial);
  initial.outgoing.push_back(MakeCryptoFrame(0, ServerHello(session_id)));
  initial.crypto_queued = true;
  Bytes flight = EncryptedExtensions(original_dcid_);
  Append(flight, CertificateMessage());
  Append(flight, CertificateVerifyMessage());
  Append(flight, ServerFinishedMessage());
  LevelState& handshake = Level(EncryptionLevel::kHandshake);
  handshake.outgoing.push_back(MakeCryptoFrame(0, std::move(flight)));
  handshake.crypto_queued = true;
}

PacketHeader ReferenceServer::ResponseHeader(EncryptionLevel level, uint64_t pn) const {
  PacketHeader h;
  h.packet_number = pn;
  h.pn_length = 2;
  h.dcid = client_scid_;
  if (level == EncryptionLevel::kOneRtt) {
    h.type = PacketType::kOneRtt;
    h.first_byte = 0x40 | (h.pn_length - 1);
    return h;
  }
  const uint8_t type_bits = level == EncryptionLevel::kInitial ? 0x00 : 0x02;
  h.type = level == EncryptionLevel::kInitial ? PacketType::kInitial : PacketType::kHandshake;
  h.first_byte = static_cast<uint8_t>(0xc0 | type_bits << 4 | (h.pn_length - 1));
  h.version = kQuicVersion1;
  h.scid = ServerConnectionId();
  h.token_length = VarInt::Minimal(0);
  h.length = VarInt{0, 2};
  return h;
}

std::vector<Bytes> ReferenceServer::Flush(CoverageMap& cov) {
  if (state_ == ServerState::kDraining) {
    for (LevelState& l : levels_) l.outgoing.clear();
    return {};
  }
  struct Built {
    PacketHeader header;
    EncryptionLevel level;
    Bytes payload;
  };
  std::vector<Built> built;
  bool pad = false;
  for (EncryptionLevel level :
       {EncryptionLevel::kInitial, EncryptionLevel::kHandshake, EncryptionLevel::kOneRtt}) {
    LevelState& l = Level(level);
    if (!HasKeys(level)) {
      l.outgoing.clear();
      l.ack_pending = false;
      continue;
    }
    std::vector<Frame> frames;
    if (l.ack_pending && !l.received.empty()) frames.push_back(AckFor(l.received));
    l.ack_pending = false;
    for (Frame& f : l.outgoing) frames.push_back(std::move(f));
    l.outgoing.clear();
    if (frames.empty()) continue;
    const uint64_t pn = l.next_pn++;
    if (CarriesCrypto(frames)) {
      l.crypto_unacked.insert(pn);
      l.crypto_queued = false;
    }
    if (level == EncryptionLevel::kInitial && HasAckEliciting(frames)) pad = true;
    Bytes payload = SerializeFrames(frames);
    if (payload.size() < 4) payload.resize(4, 0);
    Hit(cov, "send", static_cast<uint64_t>(level));
    built.push_back({ResponseHeader(level, pn), level, std::move(payload)});
  }
  if (built.empty()) return {};
  if (pad) {
    size_t other = 0;
    for (size_t i = 0; i + 1 < built.size(); ++i) {
      other += WireSize(built[i].header, built[i].payload.size());
    }
    PadToDatagram(built.back().header, built.back().payload, other, kMinInitialDatagram);
  }
  Bytes datagram;
  for (Built& b : built) {
    PlainPacket p;
    p.header = b.header;
    p.level = b.level;
    p.payload = std::move(b.payload);
    Append(datagram, Protect(p, keys_, Direction::kServerToClient).bytes);
  }
  return {std::move(datagram)};
}

bool ReferenceAuthenticates(ByteSpan packet, ByteSpan initial_dcid) {
  try {
    const SecretSet keys = WithInitialSecrets(StaticSecretSet(), initial_dcid);
    Unprotect(packet, keys, Direction::kClientToServer, kServerCidLength);
    return true;
  } catch (const Error&) {
    return false;
  }
}

Bytes FirstInitialDcid(std::span<const Bytes> datagrams) {
  for (const Bytes& d : datagrams) {
    try {
      for (const DatagramPacket& p : SplitDatagram(d, kServerCidLength).packets) {
        if (p.layout.header.type == PacketType::kInitial) return p.layout.header.dcid;
      }
    } catch (const Error&) {
    }
  }
  return {};
}

ProgramFactory ReferenceFactory(ServerConfig config) {
  return [config] { return std::make_unique<ReferenceServer>(config); };
}

}  // namespace quicfuzz
