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


// Shared fixtures for the unit tests and the acceptance binary.

#ifndef QUICFUZZ_TESTS_TEST_UTIL_H_
#define QUICFUZZ_TESTS_TEST_UTIL_H_

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>

#include "quicfuzz/seed.h"
#include "quicfuzz/session_recorder.h"

namespace quicfuzz::testing {

inline std::filesystem::path DataPath(const std::string& name) {
  return std::filesystem::path(QUICFUZZ_TEST_DATA) / name;
}

inline Bytes ReadHexFile(const std::string& name) {
  std::ifstream in(DataPath(name));
  std::string hex;
  in >> hex;
  return FromHex(hex);
}

// RFC 9001 Appendix A.2 protected client Initial and its CRYPTO frame.
inline Bytes RfcClientInitial() { return ReadHexFile("client_initial_protected.hex"); }
inline Bytes RfcCryptoFrame() { return ReadHexFile("client_initial_crypto_frame.hex"); }
inline Bytes RfcDcid() { return FromHex("8394c8f03e515708"); }

inline SeedSequence Decrypted(const RecordedSession& session) {
  auto config = std::make_shared<SecretsConfig>(session.secrets);
  return DecryptSequence(session.records, std::make_shared<SecretSet>(InstallSecrets(*config)),
                         config);
}

inline SeedSequence DecryptedSession(SessionScript script) {
  SeedSequence seq = Decrypted(RecordSession(script));
  seq.id = std::string(SessionScriptName(script));
  return seq;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path TempDir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("quicfuzz_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace quicfuzz::testing

#endif  // QUICFUZZ_TESTS_TEST_UTIL_H_
