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

// QUIC v1 packet protection with TLS_AES_128_GCM_SHA256: Initial secret
// derivation, key expansion, header protection and AEAD.

#ifndef QUICFUZZ_CRYPTO_H_
#define QUICFUZZ_CRYPTO_H_

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "quicfuzz/common.h"
#include "quicfuzz/packet.h"

namespace quicfuzz {

inline constexpr size_t kSecretLength = 32;

Bytes HkdfExtract(ByteSpan salt, ByteSpan ikm);
Bytes HkdfExpandLabel(ByteSpan secret, std::string_view label, size_t length);

struct PacketKeys {
  Bytes secret;
  std::array<uint8_t, 16> key{};
  std::array<uint8_t, 12> iv{};
  std::array<uint8_t, 16> hp{};

  // Throws Error(kWrongLength) unless `secret` is 32 bytes.
  static PacketKeys FromSecret(ByteSpan secret);

  bool operator==(const PacketKeys&) const = default;
};

// Keys for every (level, direction) pair. Client-to-server packets use the
// client slots. Immutable once built and safe to share across threads.
class SecretSet {
 public:
  const PacketKeys* Get(EncryptionLevel level, Direction dir) const;
  bool Has(EncryptionLevel level, Direction dir) const { return Get(level, dir) != nullptr; }
  void Set(EncryptionLevel level, Direction dir, PacketKeys keys);
  void Clear(EncryptionLevel level);

  bool operator==(const SecretSet&) const = default;

 private:
  std::array<std::array<std::optional<PacketKeys>, 2>, 3> slots_;
};

// Initial keys for both directions from the client's first DCID.
SecretSet DeriveInitialSecrets(ByteSpan dcid, uint32_t version = kQuicVersion1);
// Copies `base` and replaces its Initial slots with ones derived from `dcid`.
SecretSet WithInitialSecrets(const SecretSet& base, ByteSpan dcid);

// Handshake and 1-RTT traffic secrets supplied by the operator. Text form:
// one key=hex per line, keys hs_client, hs_server, rtt_client, rtt_server.
struct SecretsConfig {
  Bytes hs_client;
  Bytes hs_server;
  Bytes rtt_client;
  Bytes rtt_server;

  static SecretsConfig Parse(std::string_view text);
  static SecretsConfig Load(const std::filesystem::path& path);
  std::string Serialize() const;

  bool operator==(const SecretsConfig&) const = default;
};

// Expands all four configured slots. Initial slots stay empty until a DCID
// is known.
SecretSet InstallSecrets(const SecretsConfig& config);

struct PlainPacket {
  PacketHeader header;
  EncryptionLevel level = EncryptionLevel::kInitial;
  std::vector<Frame> frames;
  bool frames_parsed = false;
  Bytes payload;  // decrypted frame bytes; the source of truth when protecting
  std::optional<size_t> original_ciphertext_len;

  uint64_t packet_number() const { return header.packet_number; }
};

// Builds a PlainPacket from a plain image. Throws on header errors; frame
// errors only clear frames_parsed.
PlainPacket ParsePlainPacket(ByteSpan image, size_t short_dcid_len);
Bytes PlainImage(const PlainPacket& packet);

// Decrypts one wire packet (exactly its bytes, not the whole datagram).
// Throws Error(kNoKeys | kAuthFailure | kMalformed | kTruncated).
PlainPacket Unprotect(ByteSpan packet, const SecretSet& secrets, Direction dir,
                      size_t short_dcid_len);

enum class UnprotectedReason : uint8_t {
  kNone,
  kSerializeFail,
  kNoKeys,
  kSampleTooShort,
  kNotProtectable,
};

std::string_view UnprotectedReasonName(UnprotectedReason reason);

struct ProtectionOutcome {
  bool is_protected = false;
  Bytes bytes;
  UnprotectedReason reason = UnprotectedReason::kNone;
};

// Never throws. A packet that cannot be protected comes back as its plain
// image (or, if even the header cannot be written, its payload).
ProtectionOutcome Protect(const PlainPacket& packet, const SecretSet& secrets,
                          Direction dir);

// Parses a plain image and protects it. An image that does not parse is
// returned verbatim as SentUnprotected(kSerializeFail).
ProtectionOutcome ProtectImage(ByteSpan image, const SecretSet& secrets, Direction dir,
                               size_t short_dcid_len);

// Header protection mask for a 16-byte sample. Exposed for tests.
std::array<uint8_t, 5> HeaderProtectionMask(const std::array<uint8_t, 16>& hp,
                                            ByteSpan sample);

}  // namespace quicfuzz

#endif  // QUICFUZZ_CRYPTO_H_
