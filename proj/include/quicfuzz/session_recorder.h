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

// Scripted client sessions against the reference server, recorded as
// QFSEED1 captures. Every value in a session is static, so recording the
// same script twice yields identical bytes.

#ifndef QUICFUZZ_SESSION_RECORDER_H_
#define QUICFUZZ_SESSION_RECORDER_H_

#include <filesystem>
#include <string_view>
#include <vector>

#include "quicfuzz/reference_server.h"
#include "quicfuzz/seed.h"

namespace quicfuzz {

enum class SessionScript : uint8_t {
  kBasic,       // full handshake, one request, client close
  kNoFinished,  // handshake without the client Finished
};

std::string_view SessionScriptName(SessionScript script);
// Throws Error(kInvalidArgument) for an unknown name.
SessionScript ParseSessionScript(std::string_view name);

// The published protected client Initial used as the first record.
const Bytes& CanonicalClientInitial();

struct RecordedSession {
  std::vector<RawRecord> records;
  SecretsConfig secrets;
};

RecordedSession RecordSession(SessionScript script);

struct RecordedFiles {
  std::filesystem::path capture;
  std::filesystem::path secrets;
};

// Writes <dir>/<script>.seed and <dir>/reference.secrets.
RecordedFiles WriteSession(const RecordedSession& session, SessionScript script,
                           const std::filesystem::path& dir);

}  // namespace quicfuzz

#endif  // QUICFUZZ_SESSION_RECORDER_H_
