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

#include "quicfuzz/crypto.h"

#include <openssl/evp.h>
#include <openssl/hmac.h>

#include <algorithm>
#include <fstream>
#include <memory>
#include <sstream>

namespace quicfuzz {
namespace {

constexpr uint8_t kInitialSaltV1[] = {0x38, 0x76, 0x2c, 0xf7, 0xf5, 0x59, 0x34,
                                      0xb3, 0x4d, 0x17, 0x9a, 0xe6, 0xa4, 0xc8,
                                      0x0c, 0xad, 0xcc, 0xbb, 0x7f, 0x0a};

struct CipherCtxDeleter {
  void operator()(EVP_CIPHER_CTX* ctx) const { EVP_CIPHER_CTX_free(ctx); }
};
using CipherCtx = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter>;

// One context per thread per cipher, reinitialized on every call.
EVP_CIPHER_CTX* ThreadCtx(int which) {
  thread_local CipherCtx ctxs[2] = {CipherCtx(EVP_CIPHER_CTX_new()),
                                    CipherCtx(EVP_CIPHER_CTX_new())};
  return ctxs[which].get();
}

std::array<uint8_t, 12> Nonce(const PacketKeys& keys, uint64_t pn) {
  std::array<uint8_t, 12> nonce = keys.iv;
  for (int i = 0; i < 8; ++i) nonce[11 - i] ^= static_cast<uint8_t>(pn >> (8 * i));
  return nonce;
}

bool Seal(const PacketKeys& keys, uint64_t pn, ByteSpan aad, ByteSpan plaintext,
          Bytes& out) {
  EVP_CIPHER_CTX* ctx = ThreadCtx(0);
  const auto nonce = Nonce(keys, pn);
  int len = 0;
  if (EVP_EncryptInit_ex(ctx, EVP_aes_128_gcm(), nullptr, keys.key.data(), nonce.data()) != 1) {
    return false;
  }
  if (EVP_EncryptUpdate(ctx, nullptr, &len, aad.data(), static_cast<int>(aad.size())) != 1) {
    return false;
  }
  const size_t base = out.size();
  out.resize(base + plaintext.size() + kAeadTagLength);
  if (EVP_EncryptUpdate(ctx, out.data() + base, &len, plaintext.data(),
                        static_cast<int>(plaintext.size())) != 1) {
    return false;
  }
  int tail = 0;
  if (EVP_EncryptFinal_ex(ctx, out.data() + base + len, &tail) != 1) return false;
  return EVP_CIPHER_CTX_ctrl(ctx, EVP_CTRL_GCM_GET_TAG, kAeadTagLength,
                             out.data() + base + plaintext.size()) == 1;
}

bool Open(const PacketKeys& keys, uint64_t pn, ByteSpan aad, ByteSpan ciphertext,
          Bytes& out) {
  if (ciphertext.size() < kAeadTagLength) return false;
  EVP_CIPHER_CTX* ctx = ThreadCtx(0);
  const auto nonce = Nonce(keys, pn);
  const size_t body = ciphertext.size() - kAeadTagLength;
  int len = 0;
  if (EVP_DecryptInit_ex(ctx, EVP_aes_128_gcm(), nullptr, keys.key.data(), nonce.data()) != 1) {
    return false;
  }
  if (EVP_DecryptUpdate(ctx, nullptr, &len, aad.data(), static_cast<int>(aad.size())) != 1) {
    return false;
  }
  out.resize(body);
  if (EVP_DecryptUpdate(ctx, out.data(), &len, ciphertext.data(), static_cast<int>(body)) != 1) {
    return false;
  }
  Bytes tag(ciphertext.begin() + body, ciphertext.end());
  if (EVP_CIPHER_CTX_ctrl(ctx, EVP_CTRL_GCM_SET_TAG, kAeadTagLength, tag.data()) != 1) {
    return false;
  }
  int tail = 0;
  return EVP_DecryptFinal_ex(ctx, out.data() + len, &tail) == 1;
}

std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

}  // namespace

Bytes HkdfExtract(ByteSpan salt, ByteSpan ikm) {
  Bytes out(32);
  unsigned int len = 0;
  HMAC(EVP_sha256(), salt.data(), static_cast<int>(salt.size()), ikm.data(), ikm.size(),
       out.data(), &len);
  return out;
}

Bytes HkdfExpandLabel(ByteSpan secret, std::string_view label, size_t length) {
  // HkdfLabel = uint16 length || opaque label<7..255> = "tls13 " + label ||
  // opaque context<0..255> (empty here).
  const std::string full = "tls13 " + std::string(label);
  Bytes info;
  info.push_back(static_cast<uint8_t>(length >> 8));
  info.push_back(static_cast<uint8_t>(length));
  info.push_back(static_cast<uint8_t>(full.size()));
  info.insert(info.end(), full.begin(), full.end());
  info.push_back(0);

  Bytes out;
  Bytes t;
  for (uint8_t counter = 1; out.size() < length; ++counter) {
    Bytes block = t;
    block.insert(block.end(), info.begin(), info.end());
    block.push_back(counter);
    t.assign(32, 0);
    unsigned int len = 0;
    HMAC(EVP_sha256(), secret.data(), static_cast<int>(secret.size()), block.data(),
         block.size(), t.data(), &len);
    out.insert(out.end(), t.begin(), t.end());
  }
  out.resize(length);
  return out;
}

PacketKeys PacketKeys::FromSecret(ByteSpan secret) {
  if (secret.size() != kSecretLength) {
    throw Error(Errc::kWrongLength, "secret of " + std::to_string(secret.size()) + " bytes");
  }
  PacketKeys keys;
  keys.secret.assign(secret.begin(), secret.end());
  Bytes key = HkdfExpandLabel(secret, "quic key", 16);
  Bytes iv = HkdfExpandLabel(secret, "quic iv", 12);
  Bytes hp = HkdfExpandLabel(secret, "quic hp", 16);
  std::copy(key.begin(), key.end(), keys.key.begin());
  std::copy(iv.begin(), iv.end(), keys.iv.begin());
  std::copy(hp.begin(), hp.end(), keys.hp.begin());
  return keys;
}

const PacketKeys* SecretSet::Get(EncryptionLevel level, Direction dir) const {
  const auto& slot = slots_[static_cast<size_t>(level)][static_cast<size_t>(dir)];
  return slot ? &*slot : nullptr;
}

void SecretSet::Set(EncryptionLevel level, Direction dir, PacketKeys keys) {
  slots_[static_cast<size_t>(level)][static_cast<size_t>(dir)] = std::move(keys);
}

void SecretSet::Clear(EncryptionLevel level) {
  for (auto& slot : slots_[static_cast<size_t>(level)]) slot.reset();
}

SecretSet DeriveInitialSecrets(ByteSpan dcid, uint32_t version) {
  if (version != kQuicVersion1) {
    throw Error(Errc::kUnsupportedVersion, "version " + std::to_string(version));
  }
  const Bytes initial = HkdfExtract(kInitialSaltV1, dcid);
  SecretSet set;
  set.Set(EncryptionLevel::kInitial, Direction::kClientToServer,
          PacketKeys::FromSecret(HkdfExpandLabel(initial, "client in", 32)));
  set.Set(EncryptionLevel::kInitial, Direction::kServerToClient,
          PacketKeys::FromSecret(HkdfExpandLabel(initial, "server in", 32)));
  return set;
}

SecretSet WithInitialSecrets(const SecretSet& base, ByteSpan dcid) {
  SecretSet out = base;
  SecretSet initial = DeriveInitialSecrets(dcid);
  for (Direction d : {Direction::kClientToServer, Direction::kServerToClient}) {
    out.Set(EncryptionLevel::kInitial, d, *initial.Get(EncryptionLevel::kInitial, d));
  }
  return out;
}

SecretsConfig SecretsConfig::Parse(std::string_view text) {
  SecretsConfig cfg;
  bool seen[4] = {};
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = Trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(Errc::kMalformed, "line " + std::to_string(line_no) + " has no '='");
    }
    const std::string_view key = Trim(line.substr(0, eq));
    const std::string_view value = Trim(line.substr(eq + 1));
    Bytes* slot = nullptr;
    int index = 0;
    if (key == "hs_client") {
      slot = &cfg.hs_client, index = 0;
    } else if (key == "hs_server") {
      slot = &cfg.hs_server, index = 1;
    } else if (key == "rtt_client") {
      slot = &cfg.rtt_client, index = 2;
    } else if (key == "rtt_server") {
      slot = &cfg.rtt_server, index = 3;
    } else {
      throw Error(Errc::kUnknownKey, std::string(key));
    }
    *slot = FromHex(value);
    if (slot->size() != kSecretLength) {
      throw Error(Errc::kWrongLength, std::string(key) + " has " +
                                          std::to_string(slot->size()) + " bytes");
    }
    seen[index] = true;
  }
  static constexpr const char* kNames[] = {"hs_client", "hs_server", "rtt_client",
                                           "rtt_server"};
  for (int i = 0; i < 4; ++i) {
    if (!seen[i]) throw Error(Errc::kMissingSlot, kNames[i]);
  }
  return cfg;
}

SecretsConfig SecretsConfig::Load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIoFailure, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return Parse(buf.str());
}

std::string SecretsConfig::Serialize() const {
  std::ostringstream out;
  out << "hs_client=" << ToHex(hs_client) << "\n"
      << "hs_server=" << ToHex(hs_server) << "\n"
      << "rtt_client=" << ToHex(rtt_client) << "\n"
      << "rtt_server=" << ToHex(rtt_server) << "\n";
  return out.str();
}

SecretSet InstallSecrets(const SecretsConfig& config) {
  SecretSet set;
  set.Set(EncryptionLevel::kHandshake, Direction::kClientToServer,
          PacketKeys::FromSecret(config.hs_client));
  set.Set(EncryptionLevel::kHandshake, Direction::kServerToClient,
          PacketKeys::FromSecret(config.hs_server));
  set.Set(EncryptionLevel::kOneRtt, Direction::kClientToServer,
          PacketKeys::FromSecret(config.rtt_client));
  set.Set(EncryptionLevel::kOneRtt, Direction::kServerToClient,
          PacketKeys::FromSecret(config.rtt_server));
  return set;
}

std::array<uint8_t, 5> HeaderProtectionMask(const std::array<uint8_t, 16>& hp,
                                            ByteSpan sample) {
  std::array<uint8_t, 5> mask{};
  EVP_CIPHER_CTX* ctx = ThreadCtx(1);
  uint8_t block[32];
  int len = 0;
  if (sample.size() < 16 ||
      EVP_EncryptInit_ex(ctx, EVP_aes_128_ecb(), nullptr, hp.data(), nullptr) != 1 ||
      EVP_CIPHER_CTX_set_padding(ctx, 0) != 1 ||
      EVP_EncryptUpdate(ctx, block, &len, sample.data(), 16) != 1) {
    throw Error(Errc::kMalformed, "header protection failed");
  }
  std::copy(block, block + 5, mask.begin());
  return mask;
}

PlainPacket ParsePlainPacket(ByteSpan image, size_t short_dcid_len) {
  HeaderLayout layout = ParsePlainHeader(image, short_dcid_len);
  PlainPacket p;
  p.header = std::move(layout.header);
  auto level = LevelOf(p.header.type);
  p.level = level.value_or(EncryptionLevel::kInitial);
  p.payload.assign(image.begin() + layout.payload_offset, image.end());
  try {
    p.frames = ParseFrames(p.payload);
    p.frames_parsed = true;
  } catch (const Error&) {
    p.frames.clear();
    p.frames_parsed = false;
  }
  return p;
}

Bytes PlainImage(const PlainPacket& packet) {
  return SerializePlainPacket(packet.header, packet.payload);
}

PlainPacket Unprotect(ByteSpan packet, const SecretSet& secrets, Direction dir,
                      size_t short_dcid_len) {
  HeaderLayout layout = ParseHeader(packet, short_dcid_len);
  const auto level = LevelOf(layout.header.type);
  if (!level) {
    throw Error(Errc::kMalformed,
                std::string(PacketTypeName(layout.header.type)) + " carries no protected payload");
  }
  const PacketKeys* keys = secrets.Get(*level, dir);
  if (!keys) throw Error(Errc::kNoKeys, std::string(LevelName(*level)));
  const size_t end = layout.header.is_long() ? layout.packet_end : packet.size();
  const size_t pn_offset = layout.pn_offset;
  if (pn_offset + 4 + 16 > end) throw Error(Errc::kMalformed, "packet too short to sample");

  const auto mask = HeaderProtectionMask(keys->hp, packet.subspan(pn_offset + 4, 16));
  Bytes header(packet.begin(), packet.begin() + pn_offset);
  header[0] ^= mask[0] & (layout.header.is_long() ? 0x0f : 0x1f);
  const uint8_t pn_length = (header[0] & 0x03) + 1;
  uint64_t pn = 0;
  for (uint8_t i = 0; i < pn_length; ++i) {
    const uint8_t b = packet[pn_offset + i] ^ mask[1 + i];
    header.push_back(b);
    pn = pn << 8 | b;
  }

  PlainPacket out;
  out.level = *level;
  if (!Open(*keys, pn, header, packet.subspan(pn_offset + pn_length, end - pn_offset - pn_length),
            out.payload)) {
    throw Error(Errc::kAuthFailure, std::string(LevelName(*level)) + " packet " + std::to_string(pn));
  }
  out.header = std::move(layout.header);
  out.header.first_byte = header[0];
  out.header.pn_length = pn_length;
  out.header.packet_number = pn;
  out.original_ciphertext_len = end;
  try {
    out.frames = ParseFrames(out.payload);
    out.frames_parsed = true;
  } catch (const Error&) {
    out.frames_parsed = false;
  }
  return out;
}

std::string_view UnprotectedReasonName(UnprotectedReason reason) {
  switch (reason) {
    case UnprotectedReason::kNone: return "none";
    case UnprotectedReason::kSerializeFail: return "serialize-fail";
    case UnprotectedReason::kNoKeys: return "no-keys";
    case UnprotectedReason::kSampleTooShort: return "sample-too-short";
    case UnprotectedReason::kNotProtectable: return "not-protectable";
  }
  return "?";
}

ProtectionOutcome Protect(const PlainPacket& packet, const SecretSet& secrets,
                          Direction dir) {
  ProtectionOutcome out;
  Bytes header;
  try {
    SerializeHeader(packet.header, packet.payload.size(), header);
  } catch (const Error&) {
    out.bytes = packet.payload;
    out.reason = UnprotectedReason::kSerializeFail;
    return out;
  }
  auto plain = [&](UnprotectedReason reason) {
    out.bytes = header;
    out.bytes.insert(out.bytes.end(), packet.payload.begin(), packet.payload.end());
    out.reason = reason;
    return out;
  };
  const auto level = LevelOf(packet.header.type);
  if (!level) return plain(UnprotectedReason::kNotProtectable);
  const PacketKeys* keys = secrets.Get(*level, dir);
  if (!keys) return plain(UnprotectedReason::kNoKeys);
  const size_t pn_offset = header.size() - packet.header.pn_length;
  if (packet.header.pn_length + packet.payload.size() + kAeadTagLength < 4 + 16) {
    return plain(UnprotectedReason::kSampleTooShort);
  }

  Bytes wire = header;
  if (!Seal(*keys, packet.header.packet_number, header, packet.payload, wire)) {
    return plain(UnprotectedReason::kSerializeFail);
  }
  std::array<uint8_t, 5> mask;
  try {
    mask = HeaderProtectionMask(keys->hp, ByteSpan(wire).subspan(pn_offset + 4, 16));
  } catch (const Error&) {
    return plain(UnprotectedReason::kSerializeFail);
  }
  wire[0] ^= mask[0] & (packet.header.is_long() ? 0x0f : 0x1f);
  for (uint8_t i = 0; i < packet.header.pn_length; ++i) wire[pn_offset + i] ^= mask[1 + i];
  out.is_protected = true;
  out.bytes = std::move(wire);
  return out;
}

ProtectionOutcome ProtectImage(ByteSpan image, const SecretSet& secrets, Direction dir,
                               size_t short_dcid_len) {
  PlainPacket packet;
  try {
    HeaderLayout layout = ParsePlainHeader(image, short_dcid_len);
    packet.header = std::move(layout.header);
    packet.payload.assign(image.begin() + layout.payload_offset, image.end());
  } catch (const Error&) {
    ProtectionOutcome out;
    out.bytes.assign(image.begin(), image.end());
    out.reason = UnprotectedReason::kSerializeFail;
    return out;
  }
  if (!packet.header.has_packet_number() || !LevelOf(packet.header.type)) {
    ProtectionOutcome out;
    out.bytes.assign(image.begin(), image.end());
    out.reason = UnprotectedReason::kNotProtectable;
    return out;
  }
  packet.level = *LevelOf(packet.header.type);
  return Protect(packet, secrets, dir);
}

}  // namespace quicfuzz
