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

// Target lifecycle: spawn, readiness, snapshot and reset.
//
// A target program runs on its own thread and talks to the fuzzer only
// through TargetIo. Readiness is its first receive call. With snapshots
// enabled the adapter clones the program at that call and starts every run
// from a fresh copy of the clone, so initialization is paid once. Without
// snapshots every run constructs and initializes a new program.

#ifndef QUICFUZZ_SNAPSHOT_H_
#define QUICFUZZ_SNAPSHOT_H_

#include <chrono>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "quicfuzz/coverage.h"
#include "quicfuzz/sync_harness.h"

namespace quicfuzz {

class TargetProgram {
 public:
  virtual ~TargetProgram() = default;

  // Startup work done before the program can take a connection.
  virtual void Initialize() = 0;
  virtual std::unique_ptr<TargetProgram> Clone() const = 0;
  // Main loop. Returns when a receive reports kDone; reports failures by
  // throwing TargetCrash.
  virtual void Serve(TargetIo& io, CoverageMap& coverage) = 0;
  virtual Paradigm paradigm() const = 0;
};

using ProgramFactory = std::function<std::unique_ptr<TargetProgram>()>;

struct AdapterOptions {
  bool snapshot = true;
  bool sync = true;
  std::chrono::milliseconds rendezvous_timeout{1000};
  std::chrono::milliseconds init_timeout{10000};
  AsyncOptions async;
};

struct AdapterStats {
  uint64_t spawns = 0;
  uint64_t resets = 0;
  uint64_t fallback_respawns = 0;
  double total_reset_us = 0;

  double mean_reset_us() const { return resets ? total_reset_us / static_cast<double>(resets) : 0; }
  std::string Line() const;
};

struct ExecResult {
  DriveResult drive;
  CoverageMap coverage;
  std::chrono::nanoseconds elapsed{0};
};

class TargetAdapter {
 public:
  TargetAdapter(ProgramFactory factory, AdapterOptions options);
  ~TargetAdapter();
  TargetAdapter(const TargetAdapter&) = delete;
  TargetAdapter& operator=(const TargetAdapter&) = delete;

  // Spawns a program and returns once its first receive call happened.
  // With snapshots on, the program is cloned there and kept as template.
  // Throws Error(kInitTimeout | kSpawnFailure).
  void Arm();
  bool armed() const { return template_ != nullptr; }

  // One execution from the snapshot point (or a fresh spawn).
  ExecResult Run(const std::vector<Bytes>& inputs, const std::vector<size_t>& flights = {});

  void set_async_exit_timeout(std::chrono::milliseconds t) { options_.async.exit_timeout = t; }
  const AdapterOptions& options() const { return options_; }
  const AdapterStats& stats() const { return stats_; }
  Paradigm paradigm() const { return paradigm_; }

 private:
  std::unique_ptr<TargetProgram> SpawnToReadiness(bool keep_clone);

  ProgramFactory factory_;
  AdapterOptions options_;
  AdapterStats stats_;
  Paradigm paradigm_ = Paradigm::kReceiveSend;
  std::unique_ptr<TargetProgram> template_;
};

}  // namespace quicfuzz

#endif  // QUICFUZZ_SNAPSHOT_H_
