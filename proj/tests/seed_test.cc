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


#include "quicfuzz/seed.h"

#include <gtest/gtest.h>

#include <fstream>

#include "test_util.h"

namespace quicfuzz {
namespace {

using testing::DecryptedSession;
using testing::TempDir;

size_t CountKind(const SeedRecord& r, RegionKind kind) {
  size_t n = 0;
  for (const Region& g : r.regions) n += g.kind == kind;
  return n;
}

Errc CodeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::kInvalidArgument;
}

TEST(SeedTest, CaptureRoundTrip) {
  const RecordedSession session = RecordSession(SessionScript::kBasic);
  ASSERT_EQ(session.records.size(), 5u);
  for (size_t i = 0; i < session.records.size(); ++i) {
    EXPECT_EQ(session.records[i].direction,
              i % 2 == 0 ? Direction::kClientToServer : Direction::kServerToClient);
  }
  const Bytes file = SerializeCapture(session.records);
  EXPECT_EQ(std::string(file.begin(), file.begin() + 8), "QFSEED1\n");
  EXPECT_EQ(ParseCapture(file), session.records);

  const auto dir = TempDir("capture");
  ExportCapture(dir / "s.seed", session.records);
  EXPECT_EQ(ImportCapture(dir / "s.seed"), session.records);
  EXPECT_EQ(CodeOf([&] { ImportCapture(dir / "missing.seed"); }), Errc::kIoFailure);
}

TEST(SeedTest, CaptureErrors) {
  EXPECT_EQ(CodeOf([] { ParseCapture({}); }), Errc::kBadMagic);
  EXPECT_EQ(CodeOf([] { ParseCapture(ToBytes("QFSEED2\n")); }), Errc::kBadMagic);
  Bytes b = ToBytes("QFSEED1\n");
  b.insert(b.end(), {0, 0, 0, 0, 10, 1, 2, 3});
  EXPECT_EQ(CodeOf([&] { ParseCapture(b); }), Errc::kTruncatedRecord);
  Bytes bad_dir = ToBytes("QFSEED1\n");
  bad_dir.insert(bad_dir.end(), {7, 0, 0, 0, 1, 1});
  EXPECT_THROW(ParseCapture(bad_dir), Error);
  EXPECT_TRUE(ParseCapture(ToBytes("QFSEED1\n")).empty());
}

TEST(SeedTest, DecryptsBasicSession) {
  const SeedSequence seq = DecryptedSession(SessionScript::kBasic);
  ASSERT_TRUE(seq.decrypted);
  EXPECT_EQ(seq.context.initial_dcid, testing::RfcDcid());
  EXPECT_EQ(seq.context.client_short_dcid, kServerCidLength);
  ASSERT_EQ(seq.records.size(), 5u);
  for (const SeedRecord& r : seq.records) {
    EXPECT_EQ(CheckRegions(r), std::nullopt);
    for (const Region& g : r.regions) EXPECT_FALSE(g.opaque);
  }
  // Initial carrying CRYPTO and a padding run.
  const SeedRecord& c1 = seq.records[0];
  EXPECT_EQ(CountKind(c1, RegionKind::kPacket), 1u);
  EXPECT_EQ(CountKind(c1, RegionKind::kFrame), 2u);
  EXPECT_EQ(c1.bytes.size(), 1200u - kAeadTagLength);
  // Coalesced Initial, Handshake and 1-RTT packets.
  const SeedRecord& c2 = seq.records[2];
  std::vector<Region> packets;
  for (const Region& g : c2.regions) {
    if (g.kind == RegionKind::kPacket) packets.push_back(g);
  }
  ASSERT_EQ(packets.size(), 3u);
  EXPECT_EQ(packets[0].start, 0u);
  EXPECT_EQ(packets[1].start, packets[0].end);
  EXPECT_EQ(packets[2].start, packets[1].end);
  EXPECT_EQ(packets[2].end, c2.bytes.size());
}

TEST(SeedTest, MissingSecretsLeaveOpaquePackets) {
  const RecordedSession session = RecordSession(SessionScript::kBasic);
  const SeedSequence seq = DecryptSequence(session.records, std::make_shared<SecretSet>());
  // Initial packets decrypt, everything else stays opaque.
  EXPECT_FALSE(seq.records[0].regions[0].opaque);
  const SeedRecord& s2 = seq.records[3];
  ASSERT_EQ(s2.regions.size(), 1u);
  EXPECT_TRUE(s2.regions[0].opaque);
  EXPECT_EQ(s2.regions[0].start, 0u);
  EXPECT_EQ(s2.regions[0].end, s2.bytes.size());
  EXPECT_EQ(s2.bytes, session.records[3].bytes);
  size_t opaque = 0;
  for (const SeedRecord& r : seq.records) {
    for (const Region& g : r.regions) opaque += g.opaque;
  }
  EXPECT_EQ(opaque, 5u);

  SecretsConfig wrong = session.secrets;
  wrong.hs_client[0] ^= 1;
  wrong.rtt_client[0] ^= 1;
  const SeedSequence bad = DecryptSequence(
      session.records, std::make_shared<SecretSet>(InstallSecrets(wrong)));
  EXPECT_TRUE(bad.records[2].regions.back().opaque);
  EXPECT_TRUE(bad.records[4].regions[0].opaque);
}

TEST(SeedTest, EmptyCaptureHasNoInitial) {
  EXPECT_EQ(CodeOf([] { DecryptSequence({}, std::make_shared<SecretSet>()); }),
            Errc::kNoInitialPacket);
}

TEST(SeedTest, WireSequenceIsOpaque) {
  const SeedSequence seq = WireSequence(RecordSession(SessionScript::kBasic).records);
  EXPECT_FALSE(seq.decrypted);
  for (const SeedRecord& r : seq.records) {
    EXPECT_EQ(CheckRegions(r), std::nullopt);
    for (const Region& g : r.regions) EXPECT_TRUE(g.kind == RegionKind::kFrame || g.opaque);
  }
}

TEST(SeedTest, UnmodifiedSequenceEncodesToCapture) {
  const RecordedSession session = RecordSession(SessionScript::kBasic);
  const SeedSequence seq = testing::Decrypted(session);
  std::vector<EncodedRecord> detail;
  const std::vector<Bytes> wire = EncodeClientRecords(seq, &detail);
  ASSERT_EQ(wire.size(), 3u);
  EXPECT_EQ(wire[0], session.records[0].bytes);
  EXPECT_EQ(wire[1], session.records[2].bytes);
  EXPECT_EQ(wire[2], session.records[4].bytes);
  for (const EncodedRecord& r : detail) {
    for (const PacketSend& p : r.packets) EXPECT_TRUE(p.is_protected);
  }
  EXPECT_EQ(ToRawRecords(WireSequence(session.records)), session.records);
}

TEST(SeedTest, FrameRegionsCollapsePadding) {
  const Bytes payload = FromHex("0100000002000000000000");
  const auto regions = FrameRegions(payload, 10);
  ASSERT_EQ(regions.size(), 4u);
  EXPECT_EQ(regions[0].start, 10u);
  EXPECT_EQ(regions[0].end, 11u);
  EXPECT_EQ(regions[1].start, 11u);
  EXPECT_EQ(regions[1].end, 14u);
  EXPECT_EQ(regions[2].end, 19u);
  EXPECT_EQ(regions[3].end, 21u);
  EXPECT_TRUE(FrameRegions(FromHex("0601"), 0).empty());
}

TEST(SeedTest, CheckRegionsRejectsGaps) {
  SeedRecord r;
  r.bytes = Bytes(10);
  r.regions = {{0, 4, RegionKind::kPacket, true}, {5, 10, RegionKind::kPacket, true}};
  EXPECT_NE(CheckRegions(r), std::nullopt);
  r.regions = {{0, 10, RegionKind::kPacket, true}};
  EXPECT_EQ(CheckRegions(r), std::nullopt);
}

TEST(SeedTest, SavesArtifactTriples) {
  const auto dir = TempDir("artifacts");
  SeedSequence seq = DecryptedSession(SessionScript::kBasic);
  ArtifactMeta meta;
  meta.outcome = "crash";
  meta.parent = "basic";
  meta.ops = {"r0 set 5 1", "r2 bitflip 9"};
  meta.timestamp = "1.5";
  meta.extra = {{"failure_id", "ack-drain"}};
  const SavedArtifact first = SaveInteresting(seq, meta, dir);
  EXPECT_FALSE(first.deduplicated);
  EXPECT_TRUE(std::filesystem::exists(first.seed_path));
  auto stem = first.seed_path;
  stem.replace_extension();
  EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(stem).concat(".meta")));
  EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(stem).concat(".secrets")));
  const SavedArtifact second = SaveInteresting(seq, meta, dir);
  EXPECT_TRUE(second.deduplicated);
  EXPECT_EQ(second.hash, first.hash);

  const LoadedArtifact loaded = LoadArtifact(first.seed_path);
  EXPECT_EQ(loaded.meta.outcome, "crash");
  EXPECT_EQ(loaded.meta.parent, "basic");
  EXPECT_EQ(loaded.meta.ops, meta.ops);
  EXPECT_EQ(loaded.meta.extra.at("failure_id"), "ack-drain");
  EXPECT_TRUE(loaded.sequence.decrypted);
  EXPECT_EQ(loaded.sequence.records, seq.records);
  EXPECT_EQ(loaded.sequence.context.initial_dcid, seq.context.initial_dcid);
  EXPECT_EQ(*loaded.sequence.context.config, *seq.context.config);
  EXPECT_EQ(EncodeClientRecords(loaded.sequence), EncodeClientRecords(seq));
}

TEST(SeedTest, CorruptArtifacts) {
  const auto dir = TempDir("corrupt");
  const SavedArtifact saved =
      SaveInteresting(DecryptedSession(SessionScript::kBasic), ArtifactMeta{"crash"}, dir);
  auto stem = saved.seed_path;
  stem.replace_extension();

  const auto size = std::filesystem::file_size(saved.seed_path);
  std::filesystem::resize_file(saved.seed_path, size / 2);
  EXPECT_EQ(CodeOf([&] { LoadArtifact(saved.seed_path); }), Errc::kCorruptArtifact);

  const SavedArtifact other =
      SaveInteresting(DecryptedSession(SessionScript::kNoFinished), ArtifactMeta{"crash"}, dir);
  auto other_stem = other.seed_path;
  other_stem.replace_extension();
  std::filesystem::remove(std::filesystem::path(other_stem).concat(".meta"));
  EXPECT_EQ(CodeOf([&] { LoadArtifact(other.seed_path); }), Errc::kCorruptArtifact);
}

}  // namespace
}  // namespace quicfuzz
