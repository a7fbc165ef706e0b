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

namespace quicfuzz {
namespace {

AdapterOptions AdapterOptionsFor(const ExecutorOptions& options) {
  const ModeFlags flags = FlagsOf(options.mode);
  AdapterOptions a;
  a.snapshot = flags.snapshot;
  a.sync = flags.sync;
  a.rendezvous_timeout = options.rendezvous_timeout;
  a.init_timeout = options.init_timeout;
  a.async = options.async;
  return a;
}

}  // namespace

std::string_view ModeName(Mode mode) {
  switch (mode) {
    case Mode::kBaseline: return "baseline";
    case Mode::kCrypto: return "crypto";
    case Mode::kCryptoSync: return "crypto+sync";
    case Mode::kFull: return "full";
  }
  return "?";
}

Mode ParseMode(std::string_view name) {
  for (Mode m : {Mode::kBaseline, Mode::kCrypto, Mode::kCryptoSync, Mode::kFull}) {
    if (ModeName(m) == name) return m;
  }
  throw Error(Errc::kInvalidArgument, "unknown mode: " + std::string(name));
}

ModeFlags FlagsOf(Mode mode) {
  switch (mode) {
    case Mode::kBaseline: return {false, false, false};
    case Mode::kCrypto: return {true, false, false};
    case Mode::kCryptoSync: return {true, true, false};
    case Mode::kFull: return {true, true, true};
  }
  return {};
}

std::string_view OutcomeName(OutcomeKind kind) {
  switch (kind) {
    case OutcomeKind::kOk: return "ok";
    case OutcomeKind::kCrash: return "crash";
    case OutcomeKind::kHang: return "hang";
  }
  return "?";
}

Executor::Executor(ProgramFactory factory, ExecutorOptions options)
    : options_(options),
      flags_(FlagsOf(options.mode)),
      adapter_(std::move(factory), AdapterOptionsFor(options)) {}

void Executor::Prepare() {
  if (!flags_.snapshot || adapter_.armed()) return;
  try {
    adapter_.Arm();
  } catch (const Error& e) {
    throw Error(Errc::kTargetUnavailable, e.what());
  }
}

std::vector<Bytes> Executor::Encode(const SeedSequence& seq,
                                    std::vector<EncodedRecord>* detail) const {
  if (seq.decrypted) return EncodeClientRecords(seq, detail);
  std::vector<Bytes> out;
  for (const SeedRecord& r : seq.records) {
    if (r.direction == Direction::kClientToServer) out.push_back(r.bytes);
  }
  return out;
}

RunOutcome Executor::Run(const SeedSequence& seq) {
  RunOutcome out;
  out.inputs = Encode(seq);
  ExecResult exec = adapter_.Run(out.inputs);
  out.exec_time = exec.elapsed;
  out.responses = std::move(exec.drive.responses);
  out.trace = std::move(exec.drive.trace);
  if (exec.drive.crash) {
    out.kind = OutcomeKind::kCrash;
    out.failure_id = *exec.drive.crash;
  } else if (exec.drive.hang || !exec.drive.exited) {
    out.kind = OutcomeKind::kHang;
  }
  out.coverage = std::move(exec.coverage);

  const size_t short_len = seq.context.server_short_dcid;
  if (flags_.crypto && seq.decrypted) {
    const SecretSet keys = EncodingSecrets(seq);
    out.codes = ExtractCodes(DecodeResponses(out.responses, keys, short_len), true);
  } else {
    out.codes = ExtractCodes(DecodeResponses(out.responses, SecretSet{}, short_len), false);
  }
  return out;
}

void Executor::set_hang_timeout(std::chrono::milliseconds timeout) {
  adapter_.set_async_exit_timeout(timeout);
}

TraceCheck ReplayTraceCheck(Executor& executor, const SeedSequence& seq) {
  const RunOutcome a = executor.Run(seq);
  const RunOutcome b = executor.Run(seq);
  TraceCheck check;
  auto differ = [&](std::string what) {
    check.equal = false;
    check.difference = std::move(what);
    return check;
  };
  if (a.trace != b.trace) return differ("trace: " + FormatTrace(a.trace) + " | " + FormatTrace(b.trace));
  if (a.responses != b.responses) return differ("responses");
  if (!(a.coverage == b.coverage)) return differ("coverage");
  if (a.kind != b.kind || a.failure_id != b.failure_id) return differ("outcome");
  return check;
}

}  // namespace quicfuzz
