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

#include <gtest/gtest.h>

#include <random>

#include "quicfuzz/session_recorder.h"
#include "test_util.h"

namespace quicfuzz {
namespace {

const SecretSet& ClientKeys() {
  static const SecretSet keys =
      WithInitialSecrets(InstallSecrets(ReferenceSecrets()), testing::RfcDcid());
  return keys;
}

// Re-encrypts a client packet taken from a recorded datagram with new frames.
Bytes Craft(ByteSpan packet, std::vector<Frame> frames, uint64_t pn) {
  PlainPacket p = Unprotect(packet, ClientKeys(), Direction::kClientToServer, kServerCidLength);
  p.frames = std::move(frames);
  p.payload = SerializeFrames(p.frames);
  p.header.packet_number = pn;
  p.original_ciphertext_len.reset();
  const ProtectionOutcome out = Protect(p, ClientKeys(), Direction::kClientToServer);
  EXPECT_TRUE(out.is_protected);
  return out.bytes;
}

struct Fixture {
  RecordedSession session = RecordSession(SessionScript::kBasic);
  const Bytes& record(size_t i) const { return session.records[i].bytes; }
  ByteSpan handshake_packet() const { return ByteSpan(record(2)).subspan(1046, 79); }
  ByteSpan one_rtt_packet() const { return ByteSpan(record(2)).subspan(1125); }
};

TEST(ServerConfigTest, ParseAndSerialize) {
  const ServerConfig c =
      ServerConfig::Parse("# comment\nparadigm = rbs\ninit_delay_ms=10\nbugs=vn-log, B_DRAIN\n");
  EXPECT_EQ(c.paradigm, Paradigm::kReceiveBreakSend);
  EXPECT_EQ(c.init_delay_ms, 10u);
  EXPECT_TRUE(c.bug_vn);
  EXPECT_TRUE(c.bug_drain);
  EXPECT_FALSE(c.bug_stream);
  EXPECT_EQ(c.Serialize(), "paradigm=rbs\ninit_delay_ms=10\nbugs=vn-log,ack-drain\n");
  EXPECT_EQ(ServerConfig::Parse(c.Serialize()).Serialize(), c.Serialize());
  EXPECT_EQ(ServerConfig{}.Serialize(), "paradigm=rs\ninit_delay_ms=0\nbugs=none\n");
  EXPECT_TRUE(ServerConfig::Parse("bugs=none").EnabledBugs().empty());
}

TEST(ServerConfigTest, Errors) {
  auto code = [](std::string_view text) -> std::optional<Errc> {
    try {
      ServerConfig::Parse(text);
    } catch (const Error& e) {
      return e.code();
    }
    return std::nullopt;
  };
  EXPECT_EQ(code("paradigm"), Errc::kMalformed);
  EXPECT_EQ(code("paradigm=xs"), Errc::kInvalidArgument);
  EXPECT_EQ(code("init_delay_ms=ten"), Errc::kInvalidArgument);
  EXPECT_EQ(code("bugs=heap-overflow"), Errc::kInvalidArgument);
  EXPECT_EQ(code("colour=blue"), Errc::kUnknownKey);
  try {
    ServerConfig::Load("/nonexistent/manifest");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kIoFailure);
  }
}

TEST(ReferenceServerTest, ReplaysRecordedFlights) {
  Fixture f;
  ReferenceServer server;
  CoverageMap cov;
  EXPECT_EQ(server.HandleDatagram(f.record(0), cov), std::vector<Bytes>{f.record(1)});
  EXPECT_EQ(server.state(), ServerState::kHandshakeSent);
  EXPECT_EQ(server.HandleDatagram(f.record(2), cov), std::vector<Bytes>{f.record(3)});
  EXPECT_EQ(server.state(), ServerState::kEstablished);
  EXPECT_TRUE(server.HandleDatagram(f.record(4), cov).empty());
  EXPECT_EQ(server.state(), ServerState::kDraining);
}

TEST(ReferenceServerTest, ServerFlightShape) {
  Fixture f;
  const Datagram first = SplitDatagram(f.record(1), kServerCidLength);
  ASSERT_EQ(first.packets.size(), 2u);
  EXPECT_EQ(first.packets[0].layout.header.type, PacketType::kInitial);
  EXPECT_EQ(first.packets[1].layout.header.type, PacketType::kHandshake);
  EXPECT_GE(f.record(1).size(), 1200u - 32u);
  const Datagram second = SplitDatagram(f.record(3), kServerCidLength);
  ASSERT_EQ(second.packets.size(), 1u);
  EXPECT_EQ(second.packets[0].layout.header.type, PacketType::kOneRtt);
}

TEST(ReferenceServerTest, CorruptedInitialIsDropped) {
  Fixture f;
  Bytes bad = f.record(0);
  bad[200] ^= 0x01;
  ReferenceServer server;
  CoverageMap cov;
  EXPECT_TRUE(server.HandleDatagram(bad, cov).empty());
  EXPECT_EQ(server.state(), ServerState::kAwaitInitial);
  EXPECT_EQ(server.HandleDatagram(f.record(0), cov), std::vector<Bytes>{f.record(1)});
}

TEST(ReferenceServerTest, UnknownVersionGetsVersionNegotiation) {
  Fixture f;
  Bytes greased = f.record(0);
  greased[1] = 0x1a;
  greased[2] = 0x2a;
  greased[3] = 0x3a;
  greased[4] = 0x4a;
  ReferenceServer server;
  CoverageMap cov;
  const std::vector<Bytes> out = server.HandleDatagram(greased, cov);
  ASSERT_EQ(out.size(), 1u);
  const HeaderLayout vn = ParseHeader(out[0], kServerCidLength);
  EXPECT_EQ(vn.header.type, PacketType::kVersionNegotiation);
  EXPECT_EQ(vn.header.dcid, ParseHeader(f.record(0), 0).header.scid);
  EXPECT_EQ(ToHex(ByteSpan(out[0]).last(4)), "00000001");

  ServerConfig config;
  config.bug_vn = true;
  ReferenceServer buggy(config);
  try {
    buggy.HandleDatagram(greased, cov);
    FAIL() << "no crash";
  } catch (const TargetCrash& c) {
    EXPECT_EQ(c.id, "vn-log");
  }
  EXPECT_NO_THROW(buggy.HandleDatagram(f.record(0), cov));
}

TEST(ReferenceServerTest, SmallGreasedDatagramIsIgnored) {
  Fixture f;
  Bytes greased(f.record(0).begin(), f.record(0).begin() + 600);
  greased[1] = 0x1a;
  ServerConfig config;
  config.bug_vn = true;
  ReferenceServer server(config);
  CoverageMap cov;
  EXPECT_TRUE(server.HandleDatagram(greased, cov).empty());
}

TEST(ReferenceServerTest, AckWhileDrainingWithUnackedCrypto) {
  Fixture f;
  const Bytes close = Craft(f.handshake_packet(), {ConnectionCloseFrame{}}, 1);
  AckFrame ack;
  const Bytes acker = Craft(f.handshake_packet(), {ack}, 2);
  ServerConfig config;
  config.bug_drain = true;
  ReferenceServer server(config);
  CoverageMap cov;
  server.HandleDatagram(f.record(0), cov);
  EXPECT_TRUE(server.HandleDatagram(close, cov).empty());
  EXPECT_EQ(server.state(), ServerState::kDraining);
  try {
    server.HandleDatagram(acker, cov);
    FAIL() << "no crash";
  } catch (const TargetCrash& c) {
    EXPECT_EQ(c.id, "ack-drain");
  }

  ReferenceServer safe;
  safe.HandleDatagram(f.record(0), cov);
  safe.HandleDatagram(close, cov);
  EXPECT_NO_THROW(safe.HandleDatagram(acker, cov));
}

TEST(ReferenceServerTest, StreamOutsideTable) {
  Fixture f;
  StreamFrame stream;
  stream.type = 0x0b;
  stream.stream_id = VarInt{16, 1};
  stream.length = VarInt{3, 1};
  stream.data = {'a', 'b', 'c'};
  const Bytes bad = Craft(f.one_rtt_packet(), {stream}, 5);
  Bytes flight(f.record(2).begin(), f.record(2).begin() + 1125);
  ServerConfig config;
  config.bug_stream = true;
  ReferenceServer server(config);
  CoverageMap cov;
  server.HandleDatagram(f.record(0), cov);
  server.HandleDatagram(flight, cov);
  ASSERT_EQ(server.state(), ServerState::kEstablished);
  try {
    server.HandleDatagram(bad, cov);
    FAIL() << "no crash";
  } catch (const TargetCrash& c) {
    EXPECT_EQ(c.id, "stream-null");
  }

  ReferenceServer safe;
  safe.HandleDatagram(f.record(0), cov);
  safe.HandleDatagram(flight, cov);
  const std::vector<Bytes> out = safe.HandleDatagram(bad, cov);
  EXPECT_EQ(safe.state(), ServerState::kClosed);
  ASSERT_EQ(out.size(), 1u);
}

TEST(ReferenceServerTest, GarbageNeverCrashes) {
  Fixture f;
  ServerConfig config;
  config.bug_vn = config.bug_drain = config.bug_stream = true;
  std::mt19937_64 rng(11);
  ReferenceServer server(config);
  CoverageMap cov;
  server.HandleDatagram(f.record(0), cov);
  server.HandleDatagram(f.record(2), cov);
  for (int i = 0; i < 2000; ++i) {
    Bytes junk(1 + rng() % 80);
    for (auto& b : junk) b = static_cast<uint8_t>(rng());
    junk[0] = static_cast<uint8_t>(0x40 | (junk[0] & 0x3f));
    ASSERT_NO_THROW(server.HandleDatagram(junk, cov));
  }
}

TEST(ReferenceServerTest, MissingFinishedKeepsHandshakeOpen) {
  const RecordedSession s = RecordSession(SessionScript::kNoFinished);
  ASSERT_EQ(s.records.size(), 4u);
  ReferenceServer server;
  CoverageMap cov;
  server.HandleDatagram(s.records[0].bytes, cov);
  const std::vector<Bytes> out = server.HandleDatagram(s.records[2].bytes, cov);
  EXPECT_EQ(out, std::vector<Bytes>{s.records[3].bytes});
  EXPECT_EQ(server.state(), ServerState::kHandshakeSent);
}

TEST(ReferenceServerTest, AuthenticationVerdicts) {
  Fixture f;
  const Bytes dcid = FirstInitialDcid(std::vector<Bytes>{f.record(0), f.record(2)});
  EXPECT_EQ(dcid, testing::RfcDcid());
  EXPECT_TRUE(ReferenceAuthenticates(f.record(0), dcid));
  EXPECT_TRUE(ReferenceAuthenticates(f.handshake_packet(), dcid));
  EXPECT_TRUE(ReferenceAuthenticates(f.one_rtt_packet(), dcid));
  Bytes flipped(f.one_rtt_packet().begin(), f.one_rtt_packet().end());
  flipped[30] ^= 0x80;
  EXPECT_FALSE(ReferenceAuthenticates(flipped, dcid));
  EXPECT_TRUE(FirstInitialDcid(std::vector<Bytes>{f.record(4)}).empty());
}

TEST(ReferenceServerTest, CloneIsIndependent) {
  Fixture f;
  ReferenceServer server;
  CoverageMap cov;
  server.HandleDatagram(f.record(0), cov);
  auto copy = server.Clone();
  server.HandleDatagram(f.record(2), cov);
  auto& clone = static_cast<ReferenceServer&>(*copy);
  EXPECT_EQ(clone.state(), ServerState::kHandshakeSent);
  EXPECT_EQ(clone.HandleDatagram(f.record(2), cov), std::vector<Bytes>{f.record(3)});
}

}  // namespace
}  // namespace quicfuzz
