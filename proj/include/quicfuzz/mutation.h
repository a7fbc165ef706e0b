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

// Havoc-style mutation of seed sequences: byte-level operators anywhere in a
// client record and region-level operators on packet and frame regions.
// Every applied operator is logged as text and the log replays exactly.

#ifndef QUICFUZZ_MUTATION_H_
#define QUICFUZZ_MUTATION_H_

#include <string>
#include <unordered_set>
#include <variant>
#include <vector>

#include "quicfuzz/common.h"
#include "quicfuzz/seed.h"

namespace quicfuzz {

struct Donor {
  RegionKind kind = RegionKind::kFrame;
  bool opaque = false;
  Bytes bytes;
  std::vector<Region> nested;  // frame regions of a packet donor, 0-based
  bool operator==(const Donor&) const = default;
};

namespace op {
struct BitFlip { size_t bit; };
struct ByteSet { size_t pos; uint8_t value; };
struct Arith { size_t pos; int delta; };
struct InterestingValue { size_t pos; uint8_t width; size_t index; };
struct BlockOverwrite { size_t pos; Bytes bytes; };
struct BlockInsert { size_t pos; Bytes bytes; };
struct BlockDelete { size_t pos; size_t len; };
struct RegionReplace { size_t index; Donor donor; };
struct RegionInsert { size_t index; Donor donor; };
struct RegionDuplicate { size_t index; };
struct RegionDelete { size_t index; };
}  // namespace op

using MutationOp =
    std::variant<op::BitFlip, op::ByteSet, op::Arith, op::InterestingValue,
                 op::BlockOverwrite, op::BlockInsert, op::BlockDelete, op::RegionReplace,
                 op::RegionInsert, op::RegionDuplicate, op::RegionDelete>;

struct LoggedOp {
  size_t record = 0;
  MutationOp op;
};

std::string FormatOp(const LoggedOp& op);
// Throws Error(kMalformed) on text FormatOp did not produce.
LoggedOp ParseOp(const std::string& text);

// The classic interesting constants for 8, 16 and 32-bit fields.
std::span<const int64_t> InterestingValues(uint8_t width);

// Applies one operator with position clamping. Returns false, leaving the
// record untouched, when the operator does not apply: it would empty the
// record, its region index is out of range, or a donor's kind differs from
// the region it replaces. Frame regions are kept consistent by arithmetic
// only; callers re-derive them from bytes afterwards.
bool ApplyOp(SeedRecord& record, const MutationOp& op);

struct MutationBudget {
  int max_stack_log2 = 6;  // stack of 1 << [0, max_stack_log2] operators
  double region_op_probability = 0.2;
  double version_probability = 0.02;
  size_t max_block = 32;
};

class DonorPool {
 public:
  // Adds every region of the sequence's client records.
  void Add(const SeedSequence& seq);
  const std::vector<Donor>& packets() const { return packets_; }
  const std::vector<Donor>& frames() const { return frames_; }
  const Donor* Pick(RegionKind kind, Rng& rng) const;

 private:
  std::vector<Donor> packets_;
  std::vector<Donor> frames_;
  std::unordered_set<uint64_t> seen_;
};

// Produces a mutant of `parent`. Only client records change. The mutant's
// `ops` holds the formatted log and `parent` the parent's id.
SeedSequence Mutate(const SeedSequence& parent, Rng& rng, const MutationBudget& budget,
                    const DonorPool& donors);

// Re-applies a formatted op log to `parent`.
SeedSequence ReplayOps(const SeedSequence& parent, const std::vector<std::string>& ops);

}  // namespace quicfuzz

#endif  // QUICFUZZ_MUTATION_H_
