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

#include "quicfuzz/common.h"

namespace quicfuzz {

std::string_view ErrcName(Errc code) {
  switch (code) {
    case Errc::kTruncated: return "Truncated";
    case Errc::kMalformed: return "Malformed";
    case Errc::kOverflow: return "Overflow";
    case Errc::kLengthTooSmall: return "LengthTooSmall";
    case Errc::kUnrepresentable: return "Unrepresentable";
    case Errc::kUnsupportedVersion: return "UnsupportedVersion";
    case Errc::kNoKeys: return "NoKeys";
    case Errc::kAuthFailure: return "AuthFailure";
    case Errc::kMissingSlot: return "MissingSlot";
    case Errc::kBadHex: return "BadHex";
    case Errc::kWrongLength: return "WrongLength";
    case Errc::kUnknownKey: return "UnknownKey";
    case Errc::kNoInitialPacket: return "NoInitialPacket";
    case Errc::kBadMagic: return "BadMagic";
    case Errc::kTruncatedRecord: return "TruncatedRecord";
    case Errc::kIoFailure: return "IoFailure";
    case Errc::kCorruptArtifact: return "CorruptArtifact";
    case Errc::kRendezvousTimeout: return "RendezvousTimeout";
    case Errc::kAdapterClosed: return "AdapterClosed";
    case Errc::kInitTimeout: return "InitTimeout";
    case Errc::kSpawnFailure: return "SpawnFailure";
    case Errc::kHandleDead: return "HandleDead";
    case Errc::kTargetUnavailable: return "TargetUnavailable";
    case Errc::kCorpusEmpty: return "CorpusEmpty";
    case Errc::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

std::string ToHex(ByteSpan bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (uint8_t b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xf]);
  }
  return out;
}

namespace {

int HexDigit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

uint64_t SplitMix(uint64_t& x) {
  uint64_t z = (x += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

constexpr uint64_t Rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Bytes FromHex(std::string_view hex) {
  if (hex.size() % 2 != 0) throw Error(Errc::kBadHex, "odd number of digits");
  Bytes out;
  out.reserve(hex.size() / 2);
  for (size_t i = 0; i < hex.size(); i += 2) {
    int hi = HexDigit(hex[i]);
    int lo = HexDigit(hex[i + 1]);
    if (hi < 0 || lo < 0) {
      throw Error(Errc::kBadHex, "invalid digit near offset " + std::to_string(i));
    }
    out.push_back(static_cast<uint8_t>(hi << 4 | lo));
  }
  return out;
}

uint64_t Fnv1a64(ByteSpan bytes) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

Rng::Rng(uint64_t seed) {
  for (auto& s : s_) s = SplitMix(seed);
}

uint64_t Rng::Next() {
  const uint64_t result = Rotl(s_[1] * 5, 7) * 9;
  const uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = Rotl(s_[3], 45);
  return result;
}

uint64_t Rng::Below(uint64_t n) {
  if (n == 0) return 0;
  // Rejection sampling keeps the draw unbiased.
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = Next();
  } while (x >= limit);
  return x % n;
}

double Rng::Unit() { return static_cast<double>(Next() >> 11) * 0x1.0p-53; }

bool Rng::Chance(double p) { return Unit() < p; }

}  // namespace quicfuzz
