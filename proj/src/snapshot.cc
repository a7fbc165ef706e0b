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

#include <condition_variable>
#include <cstdio>
#include <mutex>
#include <thread>

namespace quicfuzz {
namespace {

using Clock = std::chrono::steady_clock;

struct Latch {
  std::mutex mu;
  std::condition_variable cv;
  bool ready = false;
  bool finished = false;

  void Set(bool Latch::*flag) {
    std::lock_guard lock(mu);
    this->*flag = true;
    cv.notify_all();
  }
  // True if readiness fired; false if the thread finished first or timed out.
  bool WaitReady(std::chrono::milliseconds timeout, bool* timed_out) {
    std::unique_lock lock(mu);
    const bool woke = cv.wait_for(lock, timeout, [this] { return ready || finished; });
    *timed_out = !woke;
    return ready;
  }
};

// Readiness probe used when arming: clones the program at its first receive
// and ends the template's serve loop.
class ProbeIo : public TargetIo {
 public:
  ProbeIo(std::shared_ptr<Latch> latch, const TargetProgram* program,
          std::unique_ptr<TargetProgram>* clone)
      : latch_(std::move(latch)), program_(program), clone_(clone) {}

  Received Receive() override { return Ready(); }
  Received TryReceive() override { return Ready(); }
  void Send(Bytes) override {}

 private:
  Received Ready() {
    if (!fired_) {
      fired_ = true;
      if (clone_) *clone_ = program_->Clone();
      latch_->Set(&Latch::ready);
    }
    return Received{};
  }

  std::shared_ptr<Latch> latch_;
  const TargetProgram* program_;
  std::unique_ptr<TargetProgram>* clone_;
  bool fired_ = false;
};

struct Worker {
  std::unique_ptr<TargetProgram> program;
  CoverageMap coverage;
  std::shared_ptr<SyncChannel> sync;
  std::shared_ptr<AsyncChannel> async;
  std::shared_ptr<Latch> latch = std::make_shared<Latch>();

  TargetIo& io() { return sync ? static_cast<TargetIo&>(*sync) : *async; }
  void Exit(std::optional<std::string> crash) {
    if (sync) {
      sync->Exit(std::move(crash));
    } else {
      async->Exit(std::move(crash));
    }
  }
};

void ServeAndReport(Worker& w) {
  try {
    w.program->Serve(w.io(), w.coverage);
    w.Exit(std::nullopt);
  } catch (const TargetCrash& c) {
    w.Exit(c.id);
  } catch (const std::exception& e) {
    w.Exit(std::string("exception:") + e.what());
  }
}

}  // namespace

std::string AdapterStats::Line() const {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "spawns=%llu resets=%llu fallback_respawns=%llu mean_reset_us=%.1f",
                static_cast<unsigned long long>(spawns), static_cast<unsigned long long>(resets),
                static_cast<unsigned long long>(fallback_respawns), mean_reset_us());
  return buf;
}

TargetAdapter::TargetAdapter(ProgramFactory factory, AdapterOptions options)
    : factory_(std::move(factory)), options_(options) {}

TargetAdapter::~TargetAdapter() = default;

std::unique_ptr<TargetProgram> TargetAdapter::SpawnToReadiness(bool keep_clone) {
  struct Shared {
    std::unique_ptr<TargetProgram> program;
    std::unique_ptr<TargetProgram> clone;
    std::shared_ptr<Latch> latch = std::make_shared<Latch>();
  };
  auto shared = std::make_shared<Shared>();
  ++stats_.spawns;
  std::thread t([shared, factory = factory_, keep_clone] {
    try {
      shared->program = factory();
      shared->program->Initialize();
      ProbeIo probe(shared->latch, shared->program.get(), keep_clone ? &shared->clone : nullptr);
      CoverageMap scratch;
      shared->program->Serve(probe, scratch);
    } catch (...) {
    }
    shared->latch->Set(&Latch::finished);
  });
  bool timed_out = false;
  const bool ready = shared->latch->WaitReady(options_.init_timeout, &timed_out);
  if (timed_out) {
    t.detach();
    throw Error(Errc::kInitTimeout, "target not ready after " +
                                        std::to_string(options_.init_timeout.count()) + " ms");
  }
  t.join();
  if (!ready) throw Error(Errc::kSpawnFailure, "target exited before its first receive");
  paradigm_ = shared->program->paradigm();
  return std::move(shared->clone);
}

void TargetAdapter::Arm() {
  template_ = SpawnToReadiness(true);
  if (!template_) throw Error(Errc::kSpawnFailure, "target could not be cloned");
}

ExecResult TargetAdapter::Run(const std::vector<Bytes>& inputs,
                              const std::vector<size_t>& flights) {
  const auto start = Clock::now();
  auto w = std::make_shared<Worker>();
  if (options_.sync) {
    w->sync = std::make_shared<SyncChannel>();
  } else {
    w->async = std::make_shared<AsyncChannel>(options_.async);
  }

  if (options_.snapshot) {
    if (!template_) {
      ++stats_.fallback_respawns;
      Arm();
    }
    const auto reset_start = Clock::now();
    w->program = template_->Clone();
    ++stats_.resets;
    stats_.total_reset_us +=
        std::chrono::duration<double, std::micro>(Clock::now() - reset_start).count();
  } else {
    ++stats_.spawns;
  }

  std::thread t([w, factory = factory_] {
    if (!w->program) {
      try {
        w->program = factory();
        w->program->Initialize();
      } catch (const std::exception& e) {
        w->latch->Set(&Latch::finished);
        w->Exit(std::string("exception:") + e.what());
        return;
      }
    }
    w->latch->Set(&Latch::ready);
    ServeAndReport(*w);
  });

  ExecResult result;
  bool timed_out = false;
  w->latch->WaitReady(options_.init_timeout, &timed_out);
  if (timed_out) {
    if (w->sync) w->sync->Close();
    if (w->async) w->async->Close();
    t.detach();
    result.drive.hang = true;
    result.elapsed = Clock::now() - start;
    return result;
  }
  if (!options_.snapshot && w->program) paradigm_ = w->program->paradigm();

  result.drive = options_.sync ? w->sync->Drive(inputs, flights, options_.rendezvous_timeout)
                               : w->async->Drive(inputs);
  if (result.drive.exited) {
    t.join();
    result.coverage = std::move(w->coverage);
  } else {
    if (w->sync) w->sync->Close();
    if (w->async) w->async->Close();
    t.detach();
  }
  result.elapsed = Clock::now() - start;
  return result;
}

}  // namespace quicfuzz
