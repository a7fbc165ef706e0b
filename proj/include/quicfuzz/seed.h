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

// Seed captures, region tables and saved artifacts.
//
// A capture on disk (QFSEED1) is a list of direction-tagged datagrams:
//
//   "QFSEED1\n" { u8 direction, u32be length, payload }*
//
// After decryption each record holds plain packet images (see packet.h)
// back to back. Packets that could not be decrypted, and trailing datagram
// padding, stay as their original bytes and are marked opaque.

#ifndef QUICFUZZ_SEED_H_
#define QUICFUZZ_SEED_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "quicfuzz/common.h"
#include "quicfuzz/crypto.h"

namespace quicfuzz {

struct RawRecord {
  Direction direction = Direction::kClientToServer;
  Bytes bytes;
  bool operator==(const RawRecord&) const = default;
};

std::vector<RawRecord> ParseCapture(ByteSpan data);
Bytes SerializeCapture(const std::vector<RawRecord>& records);
std::vector<RawRecord> ImportCapture(const std::filesystem::path& path);
void ExportCapture(const std::filesystem::path& path, const std::vector<RawRecord>& records);

enum class RegionKind : uint8_t { kPacket, kFrame };

struct Region {
  size_t start = 0;
  size_t end = 0;
  RegionKind kind = RegionKind::kPacket;
  bool opaque = false;  // packet regions only: bytes are sent as they are

  size_t size() const { return end - start; }
  bool operator==(const Region&) const = default;
};

struct SeedRecord {
  Direction direction = Direction::kClientToServer;
  Bytes bytes;
  // Sorted by (start, kind): each packet region precedes its frames.
  std::vector<Region> regions;
  bool operator==(const SeedRecord&) const = default;
};

// Region-table invariants: packet regions are nonempty and tile the record;
// every frame region is nonempty and lies inside exactly one non-opaque
// packet region; frames do not overlap. Returns an explanation on failure.
std::optional<std::string> CheckRegions(const SeedRecord& record);

// Connection facts needed to re-split and re-protect a sequence.
struct SequenceContext {
  std::shared_ptr<const SecretSet> secrets;  // Handshake and 1-RTT slots
  std::shared_ptr<const SecretsConfig> config;
  Bytes initial_dcid;           // DCID of the first client Initial
  size_t client_short_dcid = 0;  // DCID length in client short headers
  size_t server_short_dcid = 0;  // DCID length in server short headers

  size_t ShortDcidLen(Direction dir) const {
    return dir == Direction::kClientToServer ? client_short_dcid : server_short_dcid;
  }
};

struct SeedSequence {
  std::vector<SeedRecord> records;
  SequenceContext context;
  bool decrypted = false;  // false: records hold wire images only

  // Provenance and scheduling statistics.
  std::string id;
  std::string parent;
  std::vector<std::string> ops;
  uint64_t new_edges = 0;
  uint64_t new_states = 0;
  uint64_t selections = 0;
};

// Decrypts a capture into plain images with packet and frame regions.
// Initial keys come from the first client Initial's DCID; `secrets`
// supplies the other levels (it may be empty). Throws kNoInitialPacket.
SeedSequence DecryptSequence(const std::vector<RawRecord>& raw,
                             std::shared_ptr<const SecretSet> secrets,
                             std::shared_ptr<const SecretsConfig> config = nullptr);

// Keeps the capture as wire images. Every packet region is opaque.
SeedSequence WireSequence(const std::vector<RawRecord>& raw);

// Frame regions for a plain payload starting at `base`. Padding runs are
// collapsed into one region. Empty when the payload does not parse.
std::vector<Region> FrameRegions(ByteSpan payload, size_t base);

// Rebuilds frame regions of every non-opaque packet region from its bytes.
void RecomputeFrameRegions(SeedRecord& record, size_t short_dcid_len);

struct PacketSend {
  bool is_protected = false;
  UnprotectedReason reason = UnprotectedReason::kNone;
  PacketType type = PacketType::kOneRtt;
  bool opaque = false;
  size_t offset = 0;  // in the datagram
  size_t size = 0;
};

struct EncodedRecord {
  Bytes datagram;
  std::vector<PacketSend> packets;
};

// The keys used to protect a decrypted sequence: context secrets plus
// Initial keys derived from the DCID in the sequence's first client Initial.
SecretSet EncodingSecrets(const SeedSequence& seq);

EncodedRecord EncodeRecord(const SeedRecord& record, const SecretSet& secrets,
                           size_t short_dcid_len);

// Wire datagrams for every client record, in order.
std::vector<Bytes> EncodeClientRecords(const SeedSequence& seq,
                                       std::vector<EncodedRecord>* detail = nullptr);

// Plain images of a record's client records (decrypted) or its raw bytes.
std::vector<RawRecord> ToRawRecords(const SeedSequence& seq);

struct ArtifactMeta {
  std::string outcome;
  std::string parent;
  std::vector<std::string> ops;
  std::string timestamp;
  std::map<std::string, std::string> extra;
};

struct SavedArtifact {
  std::filesystem::path seed_path;
  std::string hash;
  bool deduplicated = false;
};

// Writes <hash>.seed, <hash>.secrets and <hash>.meta under `dir`. The hash
// covers record bytes, region tables and context, so saving the same mutant
// twice writes nothing the second time. Throws kIoFailure.
SavedArtifact SaveInteresting(const SeedSequence& seq, const ArtifactMeta& meta,
                              const std::filesystem::path& dir);

struct LoadedArtifact {
  SeedSequence sequence;
  ArtifactMeta meta;
};

// Loads a triple given any of its paths. Throws kCorruptArtifact.
LoadedArtifact LoadArtifact(const std::filesystem::path& path);

}  // namespace quicfuzz

#endif  // QUICFUZZ_SEED_H_
