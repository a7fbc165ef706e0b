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


#include "quicfuzz/mutation.h"

#include <gtest/gtest.h>

#include "test_util.h"

namespace quicfuzz {
namespace {

using testing::DecryptedSession;

size_t CountCrypto(const std::vector<Frame>& frames) {
  size_t n = 0;
  for (const Frame& f : frames) n += std::holds_alternative<CryptoFrame>(f);
  return n;
}

TEST(MutationTest, OpFormatRoundTrips) {
  Donor donor;
  donor.kind = RegionKind::kPacket;
  donor.bytes = FromHex("c0ffee");
  donor.nested = {{0, 1, RegionKind::kFrame, false}, {1, 3, RegionKind::kFrame, false}};
  const std::vector<LoggedOp> ops = {
      {0, op::BitFlip{17}},         {2, op::ByteSet{4, 255}},
      {0, op::Arith{9, -35}},       {4, op::InterestingValue{3, 4, 7}},
      {0, op::BlockOverwrite{1, FromHex("0102")}},
      {2, op::BlockInsert{0, FromHex("ff")}},
      {2, op::BlockDelete{5, 6}},   {0, op::RegionReplace{1, donor}},
      {2, op::RegionInsert{0, donor}}, {0, op::RegionDuplicate{2}},
      {4, op::RegionDelete{0}}};
  for (const LoggedOp& lop : ops) {
    const std::string text = FormatOp(lop);
    EXPECT_EQ(FormatOp(ParseOp(text)), text);
  }
  EXPECT_EQ(FormatOp(ops[0]), "r0 bitflip 17");
  EXPECT_THROW(ParseOp("r0 nonsense 1"), Error);
  EXPECT_THROW(ParseOp("x0 set 1 2"), Error);
  EXPECT_THROW(ParseOp("r0 set"), Error);
}

TEST(MutationTest, ByteSetOnSingleByte) {
  SeedRecord r;
  r.bytes = {0x00};
  r.regions = {{0, 1, RegionKind::kPacket, true}};
  const auto before = r.regions;
  ASSERT_TRUE(ApplyOp(r, op::ByteSet{0, 0xff}));
  EXPECT_EQ(r.bytes, Bytes{0xff});
  EXPECT_EQ(r.regions, before);
}

TEST(MutationTest, EmptyRecordYieldsIdentity) {
  SeedSequence seq;
  seq.records.push_back(SeedRecord{Direction::kClientToServer, {}, {}});
  Rng rng(1);
  const SeedSequence m = Mutate(seq, rng, MutationBudget{}, DonorPool{});
  EXPECT_EQ(m.records, seq.records);
  EXPECT_TRUE(m.ops.empty());
}

TEST(MutationTest, DuplicatingCryptoRegion) {
  const SeedSequence seq = DecryptedSession(SessionScript::kBasic);
  ASSERT_EQ(seq.records[0].regions[1].kind, RegionKind::kFrame);
  const SeedSequence m = ReplayOps(seq, {"r0 region-dup 1"});
  ASSERT_EQ(m.ops.size(), 1u);
  const SeedRecord& r = m.records[0];
  EXPECT_EQ(CheckRegions(r), std::nullopt);
  const PlainPacket p = ParsePlainPacket(r.bytes, kServerCidLength);
  EXPECT_EQ(CountCrypto(p.frames), 2u);
  EXPECT_EQ(r.bytes.size(), seq.records[0].bytes.size() + seq.records[0].regions[1].size());
}

TEST(MutationTest, BlockDeleteOfFrameRegion) {
  SeedRecord r = DecryptedSession(SessionScript::kBasic).records[0];
  ASSERT_EQ(r.regions.size(), 3u);
  const Region crypto = r.regions[1];
  const Region padding = r.regions[2];
  ASSERT_TRUE(ApplyOp(r, op::BlockDelete{crypto.start, crypto.size()}));
  ASSERT_EQ(r.regions.size(), 2u);
  EXPECT_EQ(r.regions[0].end, padding.end - crypto.size());
  EXPECT_EQ(r.regions[1].start, padding.start - crypto.size());
  EXPECT_EQ(r.regions[1].end, padding.end - crypto.size());
  EXPECT_EQ(CheckRegions(r), std::nullopt);
}

TEST(MutationTest, RegionInsertAtFront) {
  SeedSequence seq = DecryptedSession(SessionScript::kBasic);
  DonorPool pool;
  pool.Add(seq);
  ASSERT_FALSE(pool.packets().empty());
  const Donor& donor = pool.packets()[0];
  SeedRecord r = seq.records[2];
  const Bytes before = r.bytes;
  ASSERT_TRUE(ApplyOp(r, op::RegionInsert{0, donor}));
  EXPECT_TRUE(std::equal(donor.bytes.begin(), donor.bytes.end(), r.bytes.begin()));
  EXPECT_TRUE(std::equal(before.begin(), before.end(), r.bytes.begin() + donor.bytes.size()));
  EXPECT_EQ(CheckRegions(r), std::nullopt);
}

TEST(MutationTest, RegionOpsRejectKindMismatch) {
  SeedSequence seq = DecryptedSession(SessionScript::kBasic);
  DonorPool pool;
  pool.Add(seq);
  SeedRecord r = seq.records[0];
  EXPECT_FALSE(ApplyOp(r, op::RegionReplace{0, pool.frames()[0]}));
  EXPECT_FALSE(ApplyOp(r, op::RegionDelete{0}));
  EXPECT_FALSE(ApplyOp(r, op::RegionDuplicate{9}));
}

TEST(MutationTest, ServerRecordsAreNeverMutated) {
  const SeedSequence seq = DecryptedSession(SessionScript::kBasic);
  DonorPool pool;
  pool.Add(seq);
  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    const SeedSequence m = Mutate(seq, rng, MutationBudget{}, pool);
    EXPECT_EQ(m.records[1], seq.records[1]);
    EXPECT_EQ(m.records[3], seq.records[3]);
  }
  EXPECT_TRUE(ReplayOps(seq, {"r1 set 0 0"}).ops.empty());
}

TEST(MutationTest, RandomOpSequencesKeepRegionsValid) {
  const SeedSequence basic = DecryptedSession(SessionScript::kBasic);
  const SeedSequence nofin = DecryptedSession(SessionScript::kNoFinished);
  const SeedSequence wire = WireSequence(RecordSession(SessionScript::kBasic).records);
  DonorPool pool;
  pool.Add(basic);
  pool.Add(nofin);
  DonorPool wire_pool;
  wire_pool.Add(wire);
  MutationBudget budget;
  budget.region_op_probability = 0.4;
  budget.version_probability = 0.1;
  Rng rng(4);
  std::vector<SeedSequence> parents = {basic, nofin, wire};
  for (int iter = 0; iter < 10000; ++iter) {
    const size_t pick = rng.Below(parents.size());
    const SeedSequence& parent = parents[pick];
    const SeedSequence m = Mutate(parent, rng, budget, parent.decrypted ? pool : wire_pool);
    for (size_t i = 0; i < m.records.size(); ++i) {
      const auto why = CheckRegions(m.records[i]);
      ASSERT_EQ(why, std::nullopt) << "iteration " << iter << " record " << i << ": " << *why;
      ASSERT_FALSE(m.records[i].regions.empty() && !m.records[i].bytes.empty());
    }
    const SeedSequence replay = ReplayOps(parent, m.ops);
    ASSERT_EQ(replay.records, m.records) << "iteration " << iter;
    // Feed some mutants back so op sequences compound.
    if (parents.size() < 64 && rng.Chance(0.05)) parents.push_back(m);
  }
}

TEST(MutationTest, VersionDrawsHitReservedPattern) {
  const SeedSequence seq = DecryptedSession(SessionScript::kBasic);
  MutationBudget budget;
  budget.version_probability = 1.0;
  budget.max_stack_log2 = 0;
  Rng rng(5);
  int greased = 0;
  int v1 = 0;
  for (int i = 0; i < 400; ++i) {
    const SeedSequence m = Mutate(seq, rng, budget, DonorPool{});
    const Bytes& b = m.records[0].bytes;
    const uint32_t version = uint32_t{b[1]} << 24 | uint32_t{b[2]} << 16 | uint32_t{b[3]} << 8 | b[4];
    greased += (version & 0x0f0f0f0f) == 0x0a0a0a0a;
    v1 += version == kQuicVersion1;
  }
  EXPECT_GT(greased, 0);
  EXPECT_GT(v1, 0);
}

TEST(MutationTest, InterestingValueTables) {
  EXPECT_EQ(InterestingValues(1).size(), 9u);
  EXPECT_EQ(InterestingValues(2).size(), 19u);
  EXPECT_EQ(InterestingValues(4).size(), 27u);
  EXPECT_TRUE(InterestingValues(3).empty());
}

}  // namespace
}  // namespace quicfuzz
