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


#include "quicfuzz/executor.h"

#include <gtest/gtest.h>

#include "quicfuzz/reference_server.h"
#include "test_util.h"

namespace quicfuzz {
namespace {

ExecutorOptions WithMode(Mode mode) {
  ExecutorOptions o;
  o.mode = mode;
  return o;
}

TEST(ExecutorTest, ModeNames) {
  for (Mode m : {Mode::kBaseline, Mode::kCrypto, Mode::kCryptoSync, Mode::kFull}) {
    EXPECT_EQ(ParseMode(ModeName(m)), m);
  }
  EXPECT_EQ(ModeName(Mode::kCryptoSync), "crypto+sync");
  EXPECT_THROW(ParseMode("turbo"), Error);
  EXPECT_TRUE(FlagsOf(Mode::kFull).snapshot);
  EXPECT_FALSE(FlagsOf(Mode::kCryptoSync).snapshot);
  EXPECT_TRUE(FlagsOf(Mode::kCryptoSync).sync);
  EXPECT_FALSE(FlagsOf(Mode::kCrypto).sync);
  EXPECT_FALSE(FlagsOf(Mode::kBaseline).crypto);
}

TEST(ExecutorTest, FullModeBasicSession) {
  const SeedSequence seq = testing::DecryptedSession(SessionScript::kBasic);
  Executor executor(ReferenceFactory({}), WithMode(Mode::kFull));
  executor.Prepare();
  const RunOutcome out = executor.Run(seq);
  EXPECT_EQ(out.kind, OutcomeKind::kOk);
  EXPECT_EQ(out.codes, (std::vector<StateCode>{0x1062, 0x206c, 0x31e0}));
  EXPECT_EQ(out.last_code(), 0x31e0);
  ASSERT_EQ(out.inputs.size(), 3u);
  const RecordedSession raw = RecordSession(SessionScript::kBasic);
  EXPECT_EQ(out.inputs[0], raw.records[0].bytes);
  EXPECT_EQ(out.responses, (std::vector<Bytes>{raw.records[1].bytes, raw.records[3].bytes}));
  EXPECT_EQ(FormatTrace(out.trace),
            "WantsInput Sent(1200) WantsInput Sent(80) WantsInput FuzzerDone");
  EXPECT_GT(out.coverage.CountNonZero(), 0u);
}

TEST(ExecutorTest, EveryModeRunsTheSession) {
  const RecordedSession raw = RecordSession(SessionScript::kBasic);
  const SeedSequence decrypted = testing::DecryptedSession(SessionScript::kBasic);
  const SeedSequence wire = WireSequence(raw.records);
  for (Mode m : {Mode::kBaseline, Mode::kCrypto, Mode::kCryptoSync, Mode::kFull}) {
    Executor executor(ReferenceFactory({}), WithMode(m));
    executor.Prepare();
    const RunOutcome out = executor.Run(m == Mode::kBaseline ? wire : decrypted);
    EXPECT_EQ(out.kind, OutcomeKind::kOk) << ModeName(m);
    EXPECT_EQ(out.responses.size(), 2u) << ModeName(m);
    if (m == Mode::kBaseline) {
      EXPECT_EQ(out.codes, (std::vector<StateCode>{0x1000, 0x2000, 0x3000}));
    } else {
      EXPECT_EQ(out.codes, (std::vector<StateCode>{0x1062, 0x206c, 0x31e0})) << ModeName(m);
    }
  }
}

TEST(ExecutorTest, WireEncodeIsVerbatim) {
  const RecordedSession raw = RecordSession(SessionScript::kBasic);
  Executor executor(ReferenceFactory({}), WithMode(Mode::kBaseline));
  const std::vector<Bytes> out = executor.Encode(WireSequence(raw.records));
  EXPECT_EQ(out, (std::vector<Bytes>{raw.records[0].bytes, raw.records[2].bytes,
                                     raw.records[4].bytes}));
}

TEST(ExecutorTest, ReplayTraceCheckIsEqual) {
  const SeedSequence seq = testing::DecryptedSession(SessionScript::kBasic);
  for (Mode m : {Mode::kCryptoSync, Mode::kFull}) {
    ServerConfig config;
    config.paradigm = Paradigm::kReceiveBreakSend;
    Executor executor(ReferenceFactory(config), WithMode(m));
    executor.Prepare();
    for (int i = 0; i < 5; ++i) {
      const TraceCheck check = ReplayTraceCheck(executor, seq);
      EXPECT_TRUE(check.equal) << check.difference;
    }
  }
}

TEST(ExecutorTest, SnapshotStats) {
  const SeedSequence seq = testing::DecryptedSession(SessionScript::kBasic);
  Executor executor(ReferenceFactory({}), WithMode(Mode::kFull));
  executor.Prepare();
  for (int i = 0; i < 10; ++i) executor.Run(seq);
  EXPECT_EQ(executor.stats().spawns, 1u);
  EXPECT_EQ(executor.stats().resets, 10u);
}

TEST(ExecutorTest, CrashOutcome) {
  const SeedSequence seq = testing::DecryptedSession(SessionScript::kBasic);
  SeedSequence greased = WireSequence(RecordSession(SessionScript::kBasic).records);
  greased.records[0].bytes[1] = 0x1a;
  ServerConfig config;
  config.bug_vn = true;
  Executor executor(ReferenceFactory(config), WithMode(Mode::kFull));
  executor.Prepare();
  const RunOutcome crash = executor.Run(greased);
  EXPECT_EQ(crash.kind, OutcomeKind::kCrash);
  EXPECT_EQ(crash.failure_id, "vn-log");
  EXPECT_EQ(crash.last_code(), kStartState);
  EXPECT_EQ(executor.Run(seq).kind, OutcomeKind::kOk);
}

TEST(ExecutorTest, ArtifactReplayMatches) {
  const SeedSequence seq = testing::DecryptedSession(SessionScript::kBasic);
  const auto dir = testing::TempDir("executor_artifact");
  ArtifactMeta meta;
  meta.outcome = "ok";
  const SavedArtifact saved = SaveInteresting(seq, meta, dir);
  const LoadedArtifact loaded = LoadArtifact(saved.seed_path);
  Executor executor(ReferenceFactory({}), WithMode(Mode::kFull));
  executor.Prepare();
  const RunOutcome a = executor.Run(seq);
  const RunOutcome b = executor.Run(loaded.sequence);
  EXPECT_EQ(a.trace, b.trace);
  EXPECT_EQ(a.responses, b.responses);
  EXPECT_TRUE(a.coverage == b.coverage);
}

TEST(ExecutorTest, UnavailableTarget) {
  ServerConfig config;
  config.init_delay_ms = 200;
  ExecutorOptions o = WithMode(Mode::kFull);
  o.init_timeout = std::chrono::milliseconds(10);
  Executor executor(ReferenceFactory(config), o);
  try {
    executor.Prepare();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kTargetUnavailable);
  }
}

}  // namespace
}  // namespace quicfuzz
