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

// Deterministic single-connection QUIC v1 server for the basic handshake.
//
// Handshake and 1-RTT secrets, connection ids and TLS messages are static.
// TLS content is matched against fixed shapes instead of being verified.
// Three optional bugs turn specific protocol situations into TargetCrash:
//   vn-log       emitting a Version Negotiation packet
//   ack-drain    an ACK arriving in the draining state while CRYPTO data
//                the server sent is still unacknowledged
//   stream-null  a 1-RTT STREAM frame naming a stream outside the table

#ifndef QUICFUZZ_REFERENCE_SERVER_H_
#define QUICFUZZ_REFERENCE_SERVER_H_

#include <array>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "quicfuzz/crypto.h"
#include "quicfuzz/snapshot.h"

namespace quicfuzz {

namespace bug_id {
inline constexpr std::string_view kVersionNegotiation = "vn-log";
inline constexpr std::string_view kAckDrain = "ack-drain";
inline constexpr std::string_view kStreamNull = "stream-null";
}  // namespace bug_id

// Target manifest: key=value lines with keys paradigm (rs|rbs),
// init_delay_ms and bugs (comma list of bug ids, or "none").
struct ServerConfig {
  Paradigm paradigm = Paradigm::kReceiveSend;
  uint32_t init_delay_ms = 0;
  bool bug_vn = false;
  bool bug_drain = false;
  bool bug_stream = false;

  static ServerConfig Parse(std::string_view text);
  static ServerConfig Load(const std::filesystem::path& path);
  std::string Serialize() const;
  std::vector<std::string> EnabledBugs() const;
};

enum class ServerState : uint8_t { kAwaitInitial, kHandshakeSent, kEstablished, kDraining, kClosed };

std::string_view ServerStateName(ServerState state);

// Static connection material shared by the server and the session recorder.
inline constexpr size_t kServerCidLength = 8;
const Bytes& ServerConnectionId();
const SecretsConfig& ReferenceSecrets();
const Bytes& ClientFinishedData();
inline constexpr uint64_t kStreamLimit = 4;        // client bidi streams 0, 4, 8, 12
inline constexpr uint64_t kStreamWindow = 65536;   // per-stream receive window
inline constexpr uint64_t kCryptoBufferLimit = 65536;

namespace transport_error {
inline constexpr uint64_t kNoError = 0x00;
inline constexpr uint64_t kFlowControl = 0x03;
inline constexpr uint64_t kStreamLimit = 0x04;
inline constexpr uint64_t kStreamState = 0x05;
inline constexpr uint64_t kFinalSize = 0x06;
inline constexpr uint64_t kFrameEncoding = 0x07;
inline constexpr uint64_t kTransportParameter = 0x08;
inline constexpr uint64_t kConnectionIdLimit = 0x09;
inline constexpr uint64_t kProtocolViolation = 0x0a;
inline constexpr uint64_t kCryptoBufferExceeded = 0x0d;
inline constexpr uint64_t kCryptoBase = 0x100;
}  // namespace transport_error

class ReferenceServer : public TargetProgram {
 public:
  explicit ReferenceServer(ServerConfig config = {});

  void Initialize() override;
  std::unique_ptr<TargetProgram> Clone() const override;
  void Serve(TargetIo& io, CoverageMap& coverage) override;
  Paradigm paradigm() const override { return config_.paradigm; }

  // Processes one datagram and returns the datagrams to send. Throws
  // TargetCrash when an enabled bug fires.
  std::vector<Bytes> HandleDatagram(ByteSpan datagram, CoverageMap& coverage);

  ServerState state() const { return state_; }
  const ServerConfig& config() const { return config_; }

 private:
  struct LevelState {
    uint64_t next_pn = 0;
    std::set<uint64_t> received;
    bool ack_pending = false;
    bool discarded = false;
    // Receive side of the CRYPTO stream.
    uint64_t crypto_read = 0;
    std::map<uint64_t, Bytes> crypto_pending;
    Bytes crypto_messages;
    // Send side.
    std::vector<Frame> outgoing;
    std::set<uint64_t> crypto_unacked;  // server pns that carried CRYPTO
    bool crypto_queued = false;         // CRYPTO queued but not yet sent
  };

  struct StreamState {
    Bytes data;
    std::vector<bool> have;
    uint64_t contiguous = 0;
    std::optional<uint64_t> final_size;
    bool answered = false;
  };

  struct ConnectionError {
    uint64_t code;
    uint64_t frame_type;
    std::string reason;
  };

  LevelState& Level(EncryptionLevel level) { return levels_[static_cast<size_t>(level)]; }
  bool HasKeys(EncryptionLevel level) const;
  void DiscardKeys(EncryptionLevel level, CoverageMap& cov);

  void HandlePacket(ByteSpan datagram, const DatagramPacket& packet, bool first,
                    CoverageMap& cov, std::vector<Bytes>& immediate);
  void HandleFrames(const PlainPacket& packet, CoverageMap& cov);
  void HandleDrainingFrames(const PlainPacket& packet, CoverageMap& cov);
  void HandleAck(const AckFrame& ack, EncryptionLevel level, CoverageMap& cov);
  void HandleCrypto(const CryptoFrame& frame, EncryptionLevel level, CoverageMap& cov);
  void HandleTlsMessage(uint8_t type, ByteSpan body, EncryptionLevel level, CoverageMap& cov);
  void HandleClientHello(ByteSpan body, CoverageMap& cov);
  void CheckTransportParameters(ByteSpan params, CoverageMap& cov);
  void HandleClientFinished(ByteSpan body, CoverageMap& cov);
  void HandleStream(const StreamFrame& frame, CoverageMap& cov);
  void HandleNewConnectionId(const NewConnectionIdFrame& frame, CoverageMap& cov);
  void Close(const ConnectionError& error, CoverageMap& cov);

  void QueueServerFlight(ByteSpan session_id);
  std::vector<Bytes> Flush(CoverageMap& cov);
  PacketHeader ResponseHeader(EncryptionLevel level, uint64_t pn) const;

  ServerConfig config_;
  SecretSet keys_;
  ServerState state_ = ServerState::kAwaitInitial;
  bool initial_keys_ = false;
  bool handshake_ready_ = false;
  bool established_ = false;
  Bytes original_dcid_;
  Bytes client_scid_;
  std::array<LevelState, 3> levels_;
  std::map<uint64_t, StreamState> streams_;
  std::set<uint64_t> peer_cids_;
};

// Server-side AEAD verdict for one client wire packet, with Initial keys
// derived from `initial_dcid` and the static Handshake and 1-RTT secrets.
bool ReferenceAuthenticates(ByteSpan packet, ByteSpan initial_dcid);

// DCID of the first Initial packet among `datagrams`, or empty if none.
Bytes FirstInitialDcid(std::span<const Bytes> datagrams);

ProgramFactory ReferenceFactory(ServerConfig config);

}  // namespace quicfuzz

#endif  // QUICFUZZ_REFERENCE_SERVER_H_
