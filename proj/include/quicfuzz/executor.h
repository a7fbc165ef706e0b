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

// One execution of a seed sequence: encode client records, drive the target,
// decode its responses into state codes.

#ifndef QUICFUZZ_EXECUTOR_H_
#define QUICFUZZ_EXECUTOR_H_

#include <chrono>
#include <string>
#include <vector>

#include "quicfuzz/seed.h"
#include "quicfuzz/snapshot.h"
#include "quicfuzz/state_model.h"

namespace quicfuzz {

// Ablation modes. Each adds one technique to the previous one.
enum class Mode : uint8_t { kBaseline, kCrypto, kCryptoSync, kFull };

struct ModeFlags {
  bool crypto = false;
  bool sync = false;
  bool snapshot = false;
};

std::string_view ModeName(Mode mode);
// Accepts baseline, crypto, crypto+sync and full. Throws kInvalidArgument.
Mode ParseMode(std::string_view name);
ModeFlags FlagsOf(Mode mode);

enum class OutcomeKind : uint8_t { kOk, kCrash, kHang };

std::string_view OutcomeName(OutcomeKind kind);

struct RunOutcome {
  OutcomeKind kind = OutcomeKind::kOk;
  std::string failure_id;  // kCrash only
  CoverageMap coverage;
  std::vector<StateCode> codes;
  std::chrono::nanoseconds exec_time{0};
  std::vector<Bytes> inputs;
  std::vector<Bytes> responses;
  std::vector<SyncEvent> trace;

  StateCode last_code() const { return codes.empty() ? kStartState : codes.back(); }
};

struct ExecutorOptions {
  Mode mode = Mode::kFull;
  std::chrono::milliseconds rendezvous_timeout{1000};
  std::chrono::milliseconds init_timeout{10000};
  AsyncOptions async;
};

class Executor {
 public:
  Executor(ProgramFactory factory, ExecutorOptions options);

  // Arms the snapshot when enabled. Throws Error(kTargetUnavailable).
  void Prepare();

  // Client datagrams for `seq`: re-protected plain images when the sequence
  // is decrypted, the recorded bytes otherwise.
  std::vector<Bytes> Encode(const SeedSequence& seq,
                            std::vector<EncodedRecord>* detail = nullptr) const;

  RunOutcome Run(const SeedSequence& seq);

  // Async modes only: how long to wait for the target to exit.
  void set_hang_timeout(std::chrono::milliseconds timeout);

  Mode mode() const { return options_.mode; }
  const ModeFlags& flags() const { return flags_; }
  const AdapterStats& stats() const { return adapter_.stats(); }
  Paradigm paradigm() const { return adapter_.paradigm(); }

 private:
  ExecutorOptions options_;
  ModeFlags flags_;
  TargetAdapter adapter_;
};

struct TraceCheck {
  bool equal = true;
  std::string difference;  // first differing field when not equal
};

// Runs `seq` twice from fresh resets and compares traces, responses and
// coverage maps.
TraceCheck ReplayTraceCheck(Executor& executor, const SeedSequence& seq);

}  // namespace quicfuzz

#endif  // QUICFUZZ_EXECUTOR_H_
