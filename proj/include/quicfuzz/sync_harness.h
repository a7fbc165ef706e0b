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

// Fuzzer/target I/O channels.
//
// A target sees the TargetIo interface where a real server would call
// recvfrom/sendto. SyncChannel turns every such call into a rendezvous with
// the fuzzer thread, so the two sides never run at the same time and the
// event order is fixed by the inputs alone. AsyncChannel is the unsynchronized
// control: queues on both sides and timed waits on the fuzzer side.

#ifndef QUICFUZZ_SYNC_HARNESS_H_
#define QUICFUZZ_SYNC_HARNESS_H_

#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "quicfuzz/common.h"

namespace quicfuzz {

enum class Paradigm : uint8_t { kReceiveSend, kReceiveBreakSend };

std::string_view ParadigmName(Paradigm p);

struct SyncEvent {
  enum class Kind : uint8_t { kWantsInput, kSent, kDrained, kIdle, kFuzzerDone };
  Kind kind;
  size_t bytes = 0;  // kSent only

  bool operator==(const SyncEvent&) const = default;
};

std::string FormatTrace(const std::vector<SyncEvent>& trace);

// Thrown by a target to report a failure with a short identity string.
struct TargetCrash {
  std::string id;
};

class TargetIo {
 public:
  enum class Status : uint8_t { kData, kWouldBlock, kDone };
  struct Received {
    Status status = Status::kDone;
    Bytes data;
  };

  virtual ~TargetIo() = default;
  // Blocks for the next datagram. kDone ends the serve loop.
  virtual Received Receive() = 0;
  // Nonblocking variant used by receive-break-send loops.
  virtual Received TryReceive() = 0;
  virtual void Send(Bytes datagram) = 0;
};

struct DriveResult {
  std::vector<Bytes> responses;
  std::vector<SyncEvent> trace;
  std::optional<std::string> crash;
  bool hang = false;
  bool exited = false;
};

// Single-slot rendezvous. The target thread posts one call at a time and
// blocks until the fuzzer answers it; the fuzzer blocks until a call arrives.
class SyncChannel : public TargetIo {
 public:
  Received Receive() override;
  Received TryReceive() override;
  void Send(Bytes datagram) override;

  // Target side, last call of a run. Does not wait for an answer.
  void Exit(std::optional<std::string> crash);

  // Fuzzer side. Delivers `inputs` grouped into flights (one record per
  // flight when `flights` is empty) and collects everything the target
  // sends until it exits. A call that does not arrive within `timeout`
  // ends the run as a hang and closes the channel.
  DriveResult Drive(const std::vector<Bytes>& inputs, const std::vector<size_t>& flights,
                    std::chrono::milliseconds timeout);

  // Unblocks a target waiting for an answer; its receives return kDone.
  void Close();

 private:
  enum class CallKind : uint8_t { kReceive, kTryReceive, kSend, kExit };
  struct Call {
    CallKind kind;
    Bytes data;
    std::optional<std::string> crash;
  };

  Received Request(Call call);

  std::mutex mu_;
  std::condition_variable cv_;
  std::optional<Call> call_;
  std::optional<Received> answer_;
  bool closed_ = false;
};

struct AsyncOptions {
  std::chrono::microseconds wait_per_input{5000};
  std::chrono::microseconds response_delay{0};
  std::chrono::milliseconds exit_timeout{100};
};

// Unsynchronized control channel with real queues and timed waits.
class AsyncChannel : public TargetIo {
 public:
  explicit AsyncChannel(AsyncOptions options) : options_(options) {}

  Received Receive() override;
  Received TryReceive() override;
  void Send(Bytes datagram) override;
  void Exit(std::optional<std::string> crash);

  // Pushes each input, waits `wait_per_input`, collects whatever arrived.
  DriveResult Drive(const std::vector<Bytes>& inputs);
  void Close();

 private:
  AsyncOptions options_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Bytes> inbox_;
  std::deque<Bytes> outbox_;
  bool closed_ = false;
  bool exited_ = false;
  std::optional<std::string> crash_;
};

}  // namespace quicfuzz

#endif  // QUICFUZZ_SYNC_HARNESS_H_
