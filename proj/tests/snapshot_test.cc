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


#include "quicfuzz/snapshot.h"

#include <gtest/gtest.h>

#include <chrono>

#include "quicfuzz/common.h"
#include "test_programs.h"

namespace quicfuzz {
namespace {

using Clock = std::chrono::steady_clock;
using testing::EchoProgram;

ProgramFactory SlowEcho(int delay_ms, std::shared_ptr<std::atomic<int>> inits) {
  return [delay_ms, inits] {
    return std::make_unique<EchoProgram>(Paradigm::kReceiveSend, delay_ms, inits);
  };
}

TEST(SnapshotTest, ArmWaitsForReadinessAndSpawnsOnce) {
  auto inits = std::make_shared<std::atomic<int>>(0);
  TargetAdapter adapter(SlowEcho(50, inits), AdapterOptions{});
  const auto start = Clock::now();
  adapter.Arm();
  EXPECT_GE(Clock::now() - start, std::chrono::milliseconds(50));
  EXPECT_TRUE(adapter.armed());
  EXPECT_EQ(adapter.stats().spawns, 1u);
  for (int i = 0; i < 20; ++i) {
    const ExecResult r = adapter.Run({FromHex("0a0b")});
    ASSERT_TRUE(r.drive.exited);
    ASSERT_EQ(r.drive.responses.size(), 1u);
  }
  EXPECT_EQ(inits->load(), 1);
  EXPECT_EQ(adapter.stats().spawns, 1u);
  EXPECT_EQ(adapter.stats().resets, 20u);
  EXPECT_EQ(adapter.stats().fallback_respawns, 0u);
}

TEST(SnapshotTest, RunWithoutArmFallsBackOnce) {
  auto inits = std::make_shared<std::atomic<int>>(0);
  TargetAdapter adapter(SlowEcho(0, inits), AdapterOptions{});
  adapter.Run({FromHex("01")});
  adapter.Run({FromHex("01")});
  EXPECT_EQ(adapter.stats().fallback_respawns, 1u);
  EXPECT_EQ(adapter.stats().spawns, 1u);
  EXPECT_EQ(inits->load(), 1);
}

TEST(SnapshotTest, DisabledSnapshotInitializesEveryRun) {
  auto inits = std::make_shared<std::atomic<int>>(0);
  AdapterOptions o;
  o.snapshot = false;
  TargetAdapter adapter(SlowEcho(0, inits), o);
  for (int i = 0; i < 5; ++i) adapter.Run({FromHex("01")});
  EXPECT_EQ(adapter.stats().spawns, 5u);
  EXPECT_EQ(adapter.stats().resets, 0u);
  EXPECT_EQ(inits->load(), 5);
}

TEST(SnapshotTest, ResetsAreFasterThanRespawns) {
  AdapterOptions with;
  AdapterOptions without;
  without.snapshot = false;
  TargetAdapter snap(SlowEcho(20, nullptr), with);
  TargetAdapter fresh(SlowEcho(20, nullptr), without);
  snap.Arm();
  const auto t0 = Clock::now();
  for (int i = 0; i < 10; ++i) snap.Run({FromHex("01")});
  const auto t1 = Clock::now();
  for (int i = 0; i < 10; ++i) fresh.Run({FromHex("01")});
  const auto t2 = Clock::now();
  EXPECT_LT(t1 - t0, t2 - t1);
  EXPECT_GE(t2 - t1, std::chrono::milliseconds(200));
}

TEST(SnapshotTest, ProgramExitingDuringInitIsSpawnFailure) {
  TargetAdapter adapter([] { return std::make_unique<testing::QuitterProgram>(); },
                        AdapterOptions{});
  try {
    adapter.Arm();
    FAIL() << "Arm succeeded";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kSpawnFailure);
  }
}

TEST(SnapshotTest, SlowInitTimesOut) {
  AdapterOptions o;
  o.init_timeout = std::chrono::milliseconds(10);
  TargetAdapter adapter(SlowEcho(200, nullptr), o);
  try {
    adapter.Arm();
    FAIL() << "Arm succeeded";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kInitTimeout);
  }
}

TEST(SnapshotTest, ClonesDoNotShareState) {
  TargetAdapter adapter(SlowEcho(0, nullptr), AdapterOptions{});
  adapter.Arm();
  const ExecResult a = adapter.Run({FromHex("01"), FromHex("02")});
  const ExecResult b = adapter.Run({FromHex("01"), FromHex("02")});
  EXPECT_TRUE(a.coverage == b.coverage);
  EXPECT_EQ(a.drive.trace, b.drive.trace);
}

TEST(SnapshotTest, StatsLine) {
  AdapterStats s;
  s.spawns = 1;
  s.resets = 2;
  s.total_reset_us = 3;
  EXPECT_EQ(s.Line(), "spawns=1 resets=2 fallback_respawns=0 mean_reset_us=1.5");
}

}  // namespace
}  // namespace quicfuzz
