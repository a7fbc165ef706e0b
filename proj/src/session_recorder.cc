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

#include "quicfuzz/session_recorder.h"

#include <fstream>

namespace quicfuzz {
namespace {

// CRYPTO frame carrying the ClientHello of the published client Initial.
constexpr char kClientHelloFrameHex[] =
    "060040f1010000ed0303ebf8fa56f12939b9584a3896472ec40bb863cfd3e86804fe3a47f06a2b69484c0000"
    "0413011302010000c000000010000e00000b6578616d706c652e636f6dff01000100000a00080006001d0017"
    "001800100007000504616c706e000500050100000000003300260024001d00209370b2c9caa47fbabaf4559f"
    "edba753de171fa71f50f1ce15d43e994ec74d748002b0003020304000d0010000e0403050306030203080408"
    "050806002d00020101001c00024001003900320408ffffffffffffffff05048000ffff07048000ffff080110"
    "0104800075300901100f088394c8f03e51570806048000ffff";

constexpr size_t kClientInitialPayload = 1162;
constexpr uint64_t kClientInitialPn = 2;

PacketHeader ClientLongHeader(PacketType type, ByteSpan dcid, uint64_t pn, uint8_t pn_length) {
  PacketHeader h;
  const uint8_t type_bits = type == PacketType::kInitial ? 0x00 : 0x02;
  h.first_byte = static_cast<uint8_t>(0xc0 | type_bits << 4 | (pn_length - 1));
  h.type = type;
  h.version = kQuicVersion1;
  h.dcid.assign(dcid.begin(), dcid.end());
  h.token_length = VarInt::Minimal(0);
  h.length = VarInt{0, 2};
  h.packet_number = pn;
  h.pn_length = pn_length;
  return h;
}

PacketHeader ClientShortHeader(uint64_t pn, uint8_t pn_length) {
  PacketHeader h;
  h.first_byte = static_cast<uint8_t>(0x40 | (pn_length - 1));
  h.type = PacketType::kOneRtt;
  h.dcid = ServerConnectionId();
  h.packet_number = pn;
  h.pn_length = pn_length;
  return h;
}

struct ClientPacket {
  PacketHeader header;
  Bytes payload;
};

Bytes Protected(const ClientPacket& p, const SecretSet& keys) {
  PlainPacket plain;
  plain.header = p.header;
  plain.level = *LevelOf(p.header.type);
  plain.payload = p.payload;
  ProtectionOutcome out = Protect(plain, keys, Direction::kClientToServer);
  if (!out.is_protected) throw Error(Errc::kInvalidArgument, "recorder packet not protectable");
  return out.bytes;
}

// Coalesces client packets, padding the first one when it is an Initial.
Bytes ClientDatagram(std::vector<ClientPacket> packets, const SecretSet& keys) {
  if (packets.front().header.type == PacketType::kInitial) {
    size_t other = 0;
    for (size_t i = 1; i < packets.size(); ++i) {
      other += WireSize(packets[i].header, packets[i].payload.size());
    }
    PadToDatagram(packets.front().header, packets.front().payload, other, kMinInitialDatagram);
  }
  Bytes datagram;
  for (const ClientPacket& p : packets) {
    const Bytes wire = Protected(p, keys);
    datagram.insert(datagram.end(), wire.begin(), wire.end());
  }
  return datagram;
}

Bytes Frames(std::initializer_list<Frame> frames) {
  return SerializeFrames(std::vector<Frame>(frames));
}

}  // namespace

std::string_view SessionScriptName(SessionScript script) {
  return script == SessionScript::kBasic ? "basic" : "no-finished";
}

SessionScript ParseSessionScript(std::string_view name) {
  if (name == "basic") return SessionScript::kBasic;
  if (name == "no-finished") return SessionScript::kNoFinished;
  throw Error(Errc::kInvalidArgument, "unknown script: " + std::string(name));
}

const Bytes& CanonicalClientInitial() {
  static const Bytes packet = [] {
    const Bytes dcid = FromHex("8394c8f03e515708");
    ClientPacket p{ClientLongHeader(PacketType::kInitial, dcid, kClientInitialPn, 4),
                   FromHex(kClientHelloFrameHex)};
    p.header.first_byte = 0xc3;
    p.payload.resize(kClientInitialPayload, 0x00);
    return Protected(p, DeriveInitialSecrets(dcid));
  }();
  return packet;
}

RecordedSession RecordSession(SessionScript script) {
  RecordedSession session;
  session.secrets = ReferenceSecrets();
  const Bytes& c1 = CanonicalClientInitial();
  const SecretSet keys =
      WithInitialSecrets(InstallSecrets(session.secrets), FromHex("8394c8f03e515708"));

  ReferenceServer server;
  CoverageMap cov;
  auto exchange = [&](Bytes datagram) {
    session.records.push_back({Direction::kClientToServer, datagram});
    for (Bytes& r : server.HandleDatagram(datagram, cov)) {
      session.records.push_back({Direction::kServerToClient, std::move(r)});
    }
  };

  exchange(c1);
  const Bytes& server_cid = ServerConnectionId();
  std::vector<ClientPacket> second;
  second.push_back({ClientLongHeader(PacketType::kInitial, server_cid, kClientInitialPn + 1, 2),
                    Frames({MakeAckFrame(0)})});
  if (script == SessionScript::kBasic) {
    second.push_back({ClientLongHeader(PacketType::kHandshake, server_cid, 0, 2),
                      Frames({MakeAckFrame(0), MakeCryptoFrame(0, [] {
                                Bytes fin{20, 0, 0, static_cast<uint8_t>(ClientFinishedData().size())};
                                fin.insert(fin.end(), ClientFinishedData().begin(),
                                           ClientFinishedData().end());
                                return fin;
                              }())})});
    NewConnectionIdFrame ncid;
    ncid.sequence = VarInt::Minimal(1);
    ncid.retire_prior_to = VarInt::Minimal(0);
    ncid.connection_id = FromHex("c11e47c0de000001");
    for (size_t i = 0; i < ncid.reset_token.size(); ++i) {
      ncid.reset_token[i] = static_cast<uint8_t>(0xa0 + i);
    }
    StreamFrame request = MakeStreamFrame(0, 0, ToBytes("GET /index.html\r\n"), true);
    second.push_back({ClientShortHeader(0, 2), Frames({ncid, request})});
  } else {
    second.push_back({ClientLongHeader(PacketType::kHandshake, server_cid, 0, 2),
                      Frames({MakeAckFrame(0), PingFrame{}})});
  }
  exchange(ClientDatagram(std::move(second), keys));

  if (script == SessionScript::kBasic) {
    std::vector<ClientPacket> third;
    third.push_back({ClientShortHeader(1, 2),
                     Frames({MakeAckFrame(0), MakeConnectionClose(transport_error::kNoError, 0, "")})});
    exchange(ClientDatagram(std::move(third), keys));
  }
  return session;
}

RecordedFiles WriteSession(const RecordedSession& session, SessionScript script,
                           const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  RecordedFiles files{dir / (std::string(SessionScriptName(script)) + ".seed"),
                      dir / "reference.secrets"};
  ExportCapture(files.capture, session.records);
  std::ofstream out(files.secrets, std::ios::trunc);
  out << session.secrets.Serialize();
  if (!out) throw Error(Errc::kIoFailure, "cannot write " + files.secrets.string());
  return files;
}

}  // namespace quicfuzz
