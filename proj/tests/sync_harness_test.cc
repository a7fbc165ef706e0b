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


#include "quicfuzz/sync_harness.h"

#include <gtest/gtest.h>

#include <thread>

#include "quicfuzz/reference_server.h"
#include "test_programs.h"
#include "test_util.h"

namespace quicfuzz {
namespace {

using testing::EchoProgram;

AdapterOptions SyncOnly() {
  AdapterOptions o;
  o.snapshot = false;
  o.sync = true;
  return o;
}

ProgramFactory Echo(Paradigm p = Paradigm::kReceiveSend) {
  return [p] { return std::make_unique<EchoProgram>(p); };
}

TEST(SyncHarnessTest, SingleInputEcho) {
  TargetAdapter adapter(Echo(), SyncOnly());
  const ExecResult r = adapter.Run({FromHex("0102030405")});
  EXPECT_TRUE(r.drive.exited);
  EXPECT_FALSE(r.drive.crash);
  EXPECT_EQ(FormatTrace(r.drive.trace), "WantsInput Sent(5) FuzzerDone");
  ASSERT_EQ(r.drive.responses.size(), 1u);
  EXPECT_EQ(r.drive.responses[0], FromHex("0102030405"));
}

TEST(SyncHarnessTest, NoInputs) {
  TargetAdapter adapter(Echo(), SyncOnly());
  const ExecResult r = adapter.Run({});
  EXPECT_TRUE(r.drive.exited);
  EXPECT_TRUE(r.drive.responses.empty());
  EXPECT_EQ(FormatTrace(r.drive.trace), "FuzzerDone");
}

TEST(SyncHarnessTest, ReceiveBreakSendGetsWholeFlight) {
  TargetAdapter adapter(Echo(Paradigm::kReceiveBreakSend), SyncOnly());
  const ExecResult r = adapter.Run({FromHex("01"), FromHex("0202"), FromHex("030303")}, {2, 1});
  EXPECT_EQ(FormatTrace(r.drive.trace),
            "WantsInput WantsInput Drained Sent(1) Sent(2) WantsInput Drained Sent(3) FuzzerDone");
}

TEST(SyncHarnessTest, ReferenceServerBatchesFlight) {
  const RecordedSession session = RecordSession(SessionScript::kBasic);
  ServerConfig config;
  config.paradigm = Paradigm::kReceiveBreakSend;
  TargetAdapter adapter(ReferenceFactory(config), SyncOnly());
  const ExecResult r = adapter.Run({session.records[0].bytes, session.records[2].bytes}, {2});
  ASSERT_GE(r.drive.trace.size(), 3u);
  EXPECT_EQ(r.drive.trace[0].kind, SyncEvent::Kind::kWantsInput);
  EXPECT_EQ(r.drive.trace[1].kind, SyncEvent::Kind::kWantsInput);
  EXPECT_EQ(r.drive.trace[2].kind, SyncEvent::Kind::kDrained);
  EXPECT_FALSE(r.drive.responses.empty());
}

TEST(SyncHarnessTest, CrashIsReported) {
  TargetAdapter adapter(Echo(), SyncOnly());
  const ExecResult r = adapter.Run({FromHex("00"), FromHex("ff")});
  EXPECT_TRUE(r.drive.exited);
  ASSERT_TRUE(r.drive.crash);
  EXPECT_EQ(*r.drive.crash, "boom");
  EXPECT_EQ(FormatTrace(r.drive.trace), "WantsInput Sent(1) WantsInput FuzzerDone");
}

TEST(SyncHarnessTest, StalledTargetIsAHang) {
  AdapterOptions o = SyncOnly();
  o.rendezvous_timeout = std::chrono::milliseconds(50);
  TargetAdapter adapter([] { return std::make_unique<testing::StallProgram>(); }, o);
  const ExecResult r = adapter.Run({FromHex("01")});
  EXPECT_TRUE(r.drive.hang);
  EXPECT_FALSE(r.drive.exited);
}

TEST(SyncHarnessTest, AsyncChannelCollectsResponses) {
  AdapterOptions o;
  o.snapshot = false;
  o.sync = false;
  o.async.wait_per_input = std::chrono::microseconds(20000);
  TargetAdapter adapter(Echo(), o);
  const ExecResult r = adapter.Run({FromHex("01"), FromHex("0202")});
  EXPECT_TRUE(r.drive.exited);
  EXPECT_EQ(FormatTrace(r.drive.trace), "WantsInput Sent(1) WantsInput Sent(2) FuzzerDone");
}

TEST(SyncHarnessTest, RepeatedRunsHaveIdenticalTraces) {
  TargetAdapter adapter(Echo(Paradigm::kReceiveBreakSend), SyncOnly());
  const std::vector<Bytes> inputs = {FromHex("01"), FromHex("0202"), FromHex("030303")};
  const ExecResult first = adapter.Run(inputs, {1, 2});
  for (int i = 0; i < 10; ++i) {
    const ExecResult again = adapter.Run(inputs, {1, 2});
    EXPECT_EQ(again.drive.trace, first.drive.trace);
    EXPECT_EQ(again.drive.responses, first.drive.responses);
    EXPECT_TRUE(again.coverage == first.coverage);
  }
}

TEST(SyncHarnessTest, ParadigmNames) {
  EXPECT_EQ(ParadigmName(Paradigm::kReceiveSend), "rs");
  EXPECT_EQ(ParadigmName(Paradigm::kReceiveBreakSend), "rbs");
}

}  // namespace
}  // namespace quicfuzz
