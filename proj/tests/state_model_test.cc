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

#include <gtest/gtest.h>

#include "test_util.h"

namespace quicfuzz {
namespace {

ResponsePacket Decrypted(PacketType type, std::vector<Frame> frames) {
  return ResponsePacket{type, true, std::move(frames)};
}

CryptoFrame Tls(std::initializer_list<uint8_t> types) {
  Bytes data;
  for (uint8_t t : types) data.insert(data.end(), {t, 0, 0, 1, 0xaa});
  return MakeCryptoFrame(0, std::move(data));
}

TEST(StateModelTest, ClassifiesServerFlight) {
  EXPECT_EQ(ClassifyPacket(Decrypted(PacketType::kInitial, {MakeAckFrame(2), Tls({2})})),
            MakeStateCode(packet_class::kInitial, frame_type::kCrypto, 2));
  EXPECT_EQ(MakeStateCode(1, 6, 2), 0x1062);
  EXPECT_EQ(ClassifyPacket(Decrypted(PacketType::kHandshake, {Tls({8, 11, 15, 20})})), 0x206c);
  EXPECT_EQ(ClassifyPacket(Decrypted(PacketType::kOneRtt,
                                     {MakeAckFrame(0), HandshakeDoneFrame{},
                                      MakeStreamFrame(0, 0, Bytes(3), true)})),
            0x31e0);
  EXPECT_EQ(ClassifyPacket(Decrypted(PacketType::kHandshake, {Tls({24})})),
            MakeStateCode(2, 6, tls_detail::kOther));
}

TEST(StateModelTest, ClassifiesCloses) {
  EXPECT_EQ(ClassifyPacket(Decrypted(PacketType::kInitial, {MakeConnectionClose(0x0a, 0, "")})),
            MakeStateCode(1, 0x1c, close_bucket::kTransport));
  EXPECT_EQ(ClassifyPacket(Decrypted(PacketType::kInitial, {MakeConnectionClose(0x12f, 6, "")})),
            MakeStateCode(1, 0x1c, close_bucket::kCrypto));
  EXPECT_EQ(ClassifyPacket(Decrypted(PacketType::kOneRtt, {MakeConnectionClose(1, 0, "", true)})),
            MakeStateCode(3, 0x1c, close_bucket::kApplication));
}

TEST(StateModelTest, VersionNegotiationAndOpaque) {
  EXPECT_EQ(ClassifyPacket(ResponsePacket{PacketType::kVersionNegotiation, false, {}}), 0x4000);
  EXPECT_EQ(ClassifyPacket(ResponsePacket{PacketType::kHandshake, false, {}}), kOpaqueState);
  EXPECT_EQ(ClassifyPacket(ResponsePacket{PacketType::kRetry, false, {}}), kOpaqueState);
  EXPECT_EQ(ClassifyPacket(ResponsePacket{PacketType::kHandshake, false, {}}, false), 0x2000);
  EXPECT_EQ(ClassifyPacket(Decrypted(PacketType::kInitial, {Tls({2})}), false), 0x1000);
}

TEST(StateModelTest, DecodesRecordedResponses) {
  const RecordedSession session = RecordSession(SessionScript::kBasic);
  const SecretSet keys = WithInitialSecrets(InstallSecrets(session.secrets), testing::RfcDcid());
  const std::vector<Bytes> s1 = {session.records[1].bytes};
  EXPECT_EQ(ExtractCodes(DecodeResponses(s1, keys, 0)), (std::vector<StateCode>{0x1062, 0x206c}));
  const std::vector<Bytes> s2 = {session.records[3].bytes};
  EXPECT_EQ(ExtractCodes(DecodeResponses(s2, keys, 0)), (std::vector<StateCode>{0x31e0}));
  EXPECT_EQ(ExtractCodes(DecodeResponses(s1, SecretSet(), 0)),
            (std::vector<StateCode>{kOpaqueState, kOpaqueState}));
  EXPECT_EQ(FormatStateCode(0x206c), "0x206c");
}

TEST(StateModelTest, UpdateReportsNovelty) {
  StateMachine m;
  EXPECT_EQ(m.size(), 1u);
  const std::vector<StateCode> trace = {0x1062, 0x206c};
  EXPECT_TRUE(m.Update(trace));
  EXPECT_EQ(m.nodes().size(), 3u);
  EXPECT_EQ(m.edges().size(), 2u);
  EXPECT_FALSE(m.Update(trace));
  EXPECT_EQ(m.edges().at({0x1062, 0x206c}), 2u);
  // Known nodes, new edge.
  const std::vector<StateCode> reversed = {0x206c, 0x1062};
  EXPECT_TRUE(m.Update(reversed));
  EXPECT_EQ(m.nodes().size(), 3u);
  EXPECT_EQ(m.ExportEdges(),
            "0x0000 -> 0x1062 [2]\n0x0000 -> 0x206c [1]\n0x1062 -> 0x206c [2]\n"
            "0x206c -> 0x1062 [1]\n");
}

TEST(StateModelTest, SelectionRules) {
  StateMachine m;
  EXPECT_EQ(m.Select(), kStartState);
  const std::vector<StateCode> one = {0x1062};
  m.Update(one);
  EXPECT_EQ(m.Select(), 0x1062);

  StateMachine two;
  const std::vector<StateCode> trace = {0x206c, 0x1062};
  two.Update(trace);
  // Equal scores pick the lower code.
  EXPECT_EQ(two.Select(SelectionWeights{1.0, 0.0, 1.0}), 0x1062);
  two.MarkFuzzed(0x1062);
  EXPECT_EQ(two.Select(SelectionWeights{1.0, 0.0, 1.0}), 0x206c);
  // Novelty decays on selection.
  StateMachine three;
  three.Update(trace);
  EXPECT_EQ(three.Select(SelectionWeights{0.0, 1.0, 0.5}), 0x1062);
  EXPECT_EQ(three.Select(SelectionWeights{0.0, 1.0, 0.5}), 0x206c);
  EXPECT_EQ(three.nodes().at(0x1062).selections, 1u);
}

}  // namespace
}  // namespace quicfuzz
