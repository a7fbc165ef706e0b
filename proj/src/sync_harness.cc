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

#include <sstream>
#include <thread>

namespace quicfuzz {

std::string_view ParadigmName(Paradigm p) {
  return p == Paradigm::kReceiveSend ? "rs" : "rbs";
}

std::string FormatTrace(const std::vector<SyncEvent>& trace) {
  std::ostringstream os;
  for (size_t i = 0; i < trace.size(); ++i) {
    if (i) os << ' ';
    switch (trace[i].kind) {
      case SyncEvent::Kind::kWantsInput: os << "WantsInput"; break;
      case SyncEvent::Kind::kSent: os << "Sent(" << trace[i].bytes << ")"; break;
      case SyncEvent::Kind::kDrained: os << "Drained"; break;
      case SyncEvent::Kind::kIdle: os << "Idle"; break;
      case SyncEvent::Kind::kFuzzerDone: os << "FuzzerDone"; break;
    }
  }
  return os.str();
}

TargetIo::Received SyncChannel::Request(Call call) {
  std::unique_lock lock(mu_);
  if (closed_) return Received{};
  call_ = std::move(call);
  cv_.notify_all();
  cv_.wait(lock, [this] { return answer_.has_value() || closed_; });
  if (!answer_) return Received{};
  Received r = std::move(*answer_);
  answer_.reset();
  return r;
}

TargetIo::Received SyncChannel::Receive() { return Request(Call{CallKind::kReceive, {}, {}}); }

TargetIo::Received SyncChannel::TryReceive() {
  return Request(Call{CallKind::kTryReceive, {}, {}});
}

void SyncChannel::Send(Bytes datagram) {
  Request(Call{CallKind::kSend, std::move(datagram), {}});
}

void SyncChannel::Exit(std::optional<std::string> crash) {
  std::lock_guard lock(mu_);
  if (closed_) return;
  call_ = Call{CallKind::kExit, {}, std::move(crash)};
  cv_.notify_all();
}

void SyncChannel::Close() {
  std::lock_guard lock(mu_);
  closed_ = true;
  cv_.notify_all();
}

DriveResult SyncChannel::Drive(const std::vector<Bytes>& inputs,
                               const std::vector<size_t>& flights,
                               std::chrono::milliseconds timeout) {
  DriveResult result;
  size_t next = 0;
  size_t flight = 0;
  size_t flight_left = 0;  // records still owed to the current flight
  bool done_sent = false;
  std::unique_lock lock(mu_);
  while (true) {
    if (!cv_.wait_for(lock, timeout, [this] { return call_.has_value(); })) {
      result.hang = true;
      closed_ = true;
      cv_.notify_all();
      break;
    }
    Call call = std::move(*call_);
    call_.reset();
    if (call.kind == CallKind::kExit) {
      result.exited = true;
      result.crash = std::move(call.crash);
      break;
    }
    Received answer;
    switch (call.kind) {
      case CallKind::kSend:
        result.trace.push_back({SyncEvent::Kind::kSent, call.data.size()});
        result.responses.push_back(std::move(call.data));
        answer.status = Status::kData;
        break;
      case CallKind::kReceive:
      case CallKind::kTryReceive: {
        const bool blocking = call.kind == CallKind::kReceive;
        if (blocking && flight_left == 0 && next < inputs.size()) {
          flight_left = flight < flights.size() ? std::max<size_t>(1, flights[flight]) : 1;
          ++flight;
        }
        if (flight_left > 0 && next < inputs.size()) {
          --flight_left;
          answer.status = Status::kData;
          answer.data = inputs[next++];
          result.trace.push_back({SyncEvent::Kind::kWantsInput, 0});
        } else if (!blocking && next < inputs.size()) {
          answer.status = Status::kWouldBlock;
          result.trace.push_back({SyncEvent::Kind::kDrained, 0});
        } else if (!blocking && flight_left == 0 && next >= inputs.size() && !done_sent) {
          // The last flight is drained too; let the target reach its send loop.
          answer.status = Status::kWouldBlock;
          result.trace.push_back({SyncEvent::Kind::kDrained, 0});
          done_sent = true;
        } else {
          answer.status = Status::kDone;
        }
        break;
      }
      case CallKind::kExit:
        break;
    }
    answer_ = std::move(answer);
    cv_.notify_all();
  }
  result.trace.push_back({SyncEvent::Kind::kFuzzerDone, 0});
  return result;
}

TargetIo::Received AsyncChannel::Receive() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [this] { return !inbox_.empty() || closed_; });
  if (inbox_.empty()) return Received{};
  Received r{Status::kData, std::move(inbox_.front())};
  inbox_.pop_front();
  return r;
}

TargetIo::Received AsyncChannel::TryReceive() {
  std::lock_guard lock(mu_);
  if (!inbox_.empty()) {
    Received r{Status::kData, std::move(inbox_.front())};
    inbox_.pop_front();
    return r;
  }
  return Received{closed_ ? Status::kDone : Status::kWouldBlock, {}};
}

void AsyncChannel::Send(Bytes datagram) {
  if (options_.response_delay.count() > 0) std::this_thread::sleep_for(options_.response_delay);
  std::lock_guard lock(mu_);
  outbox_.push_back(std::move(datagram));
  cv_.notify_all();
}

void AsyncChannel::Exit(std::optional<std::string> crash) {
  std::lock_guard lock(mu_);
  exited_ = true;
  crash_ = std::move(crash);
  cv_.notify_all();
}

void AsyncChannel::Close() {
  std::lock_guard lock(mu_);
  closed_ = true;
  cv_.notify_all();
}

DriveResult AsyncChannel::Drive(const std::vector<Bytes>& inputs) {
  DriveResult result;
  auto collect = [&](std::unique_lock<std::mutex>&) {
    bool any = false;
    while (!outbox_.empty()) {
      result.trace.push_back({SyncEvent::Kind::kSent, outbox_.front().size()});
      result.responses.push_back(std::move(outbox_.front()));
      outbox_.pop_front();
      any = true;
    }
    return any;
  };
  for (const Bytes& input : inputs) {
    std::unique_lock lock(mu_);
    if (exited_) break;
    inbox_.push_back(input);
    result.trace.push_back({SyncEvent::Kind::kWantsInput, 0});
    cv_.notify_all();
    lock.unlock();
    std::this_thread::sleep_for(options_.wait_per_input);
    lock.lock();
    if (!collect(lock)) result.trace.push_back({SyncEvent::Kind::kIdle, 0});
  }
  std::unique_lock lock(mu_);
  closed_ = true;
  cv_.notify_all();
  result.trace.push_back({SyncEvent::Kind::kFuzzerDone, 0});
  if (!cv_.wait_for(lock, options_.exit_timeout, [this] { return exited_; })) {
    result.hang = true;
  }
  collect(lock);
  result.exited = exited_;
  result.crash = crash_;
  return result;
}

}  // namespace quicfuzz
