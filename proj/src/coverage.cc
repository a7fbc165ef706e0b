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

#include "quicfuzz/coverage.h"

#include <algorithm>

namespace quicfuzz {

void CoverageMap::Reset() {
  std::fill(counts_.begin(), counts_.end(), 0);
  prev_ = 0;
}

size_t CoverageMap::CountNonZero() const {
  return static_cast<size_t>(std::count_if(counts_.begin(), counts_.end(),
                                           [](uint8_t c) { return c != 0; }));
}

uint64_t CoverageMap::Hash() const { return Fnv1a64(counts_); }

uint8_t BucketOf(uint8_t count) {
  if (count == 0) return 0;
  if (count == 1) return 1;
  if (count == 2) return 2;
  if (count == 3) return 4;
  if (count <= 7) return 8;
  if (count <= 15) return 16;
  if (count <= 31) return 32;
  if (count <= 127) return 64;
  return 128;
}

CoverageDelta GlobalCoverage::Peek(const CoverageMap& run) const {
  CoverageDelta d;
  const auto& counts = run.counts();
  for (size_t i = 0; i < kCoverageMapSize; ++i) {
    if (counts[i] == 0) continue;
    const uint8_t b = BucketOf(counts[i]);
    if ((seen_[i] & b) == b) continue;
    ++d.new_buckets;
    if (seen_[i] == 0) ++d.new_edges;
  }
  return d;
}

CoverageDelta GlobalCoverage::Merge(const CoverageMap& run) {
  CoverageDelta d;
  const auto& counts = run.counts();
  for (size_t i = 0; i < kCoverageMapSize; ++i) {
    if (counts[i] == 0) continue;
    const uint8_t b = BucketOf(counts[i]);
    if ((seen_[i] & b) == b) continue;
    ++d.new_buckets;
    if (seen_[i] == 0) {
      ++d.new_edges;
      ++edges_;
    }
    seen_[i] |= b;
  }
  return d;
}

}  // namespace quicfuzz
