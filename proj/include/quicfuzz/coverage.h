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

// AFL-style edge coverage: a 64 KiB map of saturating hit counters indexed
// by cur ^ prev, with prev = cur >> 1 after every hit.

#ifndef QUICFUZZ_COVERAGE_H_
#define QUICFUZZ_COVERAGE_H_

#include <cstdint>
#include <string_view>
#include <vector>

#include "quicfuzz/common.h"

namespace quicfuzz {

inline constexpr size_t kCoverageMapSize = 65536;

constexpr uint16_t BlockId(std::string_view label) {
  return static_cast<uint16_t>(Fnv1a64(label) & 0xffff);
}

class CoverageMap {
 public:
  CoverageMap() : counts_(kCoverageMapSize, 0) {}

  void Hit(uint16_t block) {
    uint8_t& c = counts_[block ^ prev_];
    if (c != 0xff) ++c;
    prev_ = block >> 1;
  }
  void Hit(std::string_view label) { Hit(BlockId(label)); }

  void Reset();
  const std::vector<uint8_t>& counts() const { return counts_; }
  size_t CountNonZero() const;
  uint64_t Hash() const;

  bool operator==(const CoverageMap& other) const { return counts_ == other.counts_; }

 private:
  std::vector<uint8_t> counts_;
  uint16_t prev_ = 0;
};

// Maps a hit count to its bucket bit: 1, 2, 3, 4-7, 8-15, 16-31, 32-127, 128+.
uint8_t BucketOf(uint8_t count);

struct CoverageDelta {
  size_t new_edges = 0;    // entries never hit before
  size_t new_buckets = 0;  // entries that gained a bucket bit (includes new edges)
  bool interesting() const { return new_buckets > 0; }
};

// Bytewise union of bucket bits over every run of a campaign.
class GlobalCoverage {
 public:
  GlobalCoverage() : seen_(kCoverageMapSize, 0) {}

  CoverageDelta Merge(const CoverageMap& run);
  // Same as Merge without updating.
  CoverageDelta Peek(const CoverageMap& run) const;
  size_t edges() const { return edges_; }
  const std::vector<uint8_t>& bits() const { return seen_; }

 private:
  std::vector<uint8_t> seen_;
  size_t edges_ = 0;
};

}  // namespace quicfuzz

#endif  // QUICFUZZ_COVERAGE_H_
