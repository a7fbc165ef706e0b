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

#include "quicfuzz/mutation.h"

#include <algorithm>
#include <sstream>

namespace quicfuzz {
namespace {

constexpr int64_t kInteresting8[] = {-128, -1, 0, 1, 16, 32, 64, 100, 127};
constexpr int64_t kInteresting16[] = {-128, -1, 0,   1,    16,   32,   64,    100, 127,
                                      -32768, -129, 128, 255, 256, 512, 1000, 1024, 4096, 32767};
constexpr int64_t kInteresting32[] = {
    -128,        -1,         0,      1,     16,        32,         64,  100, 127,
    -32768,      -129,       128,    255,   256,       512,        1000, 1024, 4096,
    32767,       -2147483648LL, -100663046, -32769, 32768, 65535, 65536, 100663045,
    2147483647};

void Shift(Region& r, int64_t delta) {
  r.start = static_cast<size_t>(static_cast<int64_t>(r.start) + delta);
  r.end = static_cast<size_t>(static_cast<int64_t>(r.end) + delta);
}

// Index of the packet region that encloses region `i`.
size_t EnclosingPacket(const std::vector<Region>& regions, size_t i) {
  while (i > 0 && regions[i].kind != RegionKind::kPacket) --i;
  return i;
}

// One past the last frame region belonging to packet region `i`.
size_t PacketGroupEnd(const std::vector<Region>& regions, size_t i) {
  size_t j = i + 1;
  while (j < regions.size() && regions[j].kind == RegionKind::kFrame) ++j;
  return j;
}

// Removes bytes [start, end) and the regions [first, last). `enclosing`, if
// set, is the packet that contained the removed frame and shrinks instead of
// shifting.
void EraseRegions(SeedRecord& rec, size_t first, size_t last, size_t start, size_t end,
                  std::optional<size_t> enclosing) {
  const int64_t len = static_cast<int64_t>(end - start);
  rec.bytes.erase(rec.bytes.begin() + start, rec.bytes.begin() + end);
  for (size_t j = 0; j < rec.regions.size(); ++j) {
    if (j >= first && j < last) continue;
    if (enclosing && j == *enclosing) {
      rec.regions[j].end -= len;
    } else if (rec.regions[j].start >= end) {
      Shift(rec.regions[j], -len);
    }
  }
  rec.regions.erase(rec.regions.begin() + first, rec.regions.begin() + last);
}

// Inserts `donor` at byte `pos` as new regions placed at `index`.
void InsertDonor(SeedRecord& rec, size_t pos, const Donor& donor, size_t index,
                 std::optional<size_t> enclosing) {
  const int64_t len = static_cast<int64_t>(donor.bytes.size());
  rec.bytes.insert(rec.bytes.begin() + pos, donor.bytes.begin(), donor.bytes.end());
  for (size_t j = 0; j < rec.regions.size(); ++j) {
    if (enclosing && j == *enclosing) {
      rec.regions[j].end += len;
    } else if (rec.regions[j].start >= pos) {
      Shift(rec.regions[j], len);
    }
  }
  std::vector<Region> added;
  added.push_back(Region{pos, pos + donor.bytes.size(), donor.kind,
                         donor.kind == RegionKind::kPacket && donor.opaque});
  if (donor.kind == RegionKind::kPacket && !donor.opaque) {
    for (const Region& n : donor.nested) {
      added.push_back(Region{pos + n.start, pos + n.end, RegionKind::kFrame, false});
    }
  }
  rec.regions.insert(rec.regions.begin() + index, added.begin(), added.end());
}

Donor DonorFrom(const SeedRecord& rec, size_t i) {
  const Region& r = rec.regions[i];
  Donor d;
  d.kind = r.kind;
  d.opaque = r.opaque;
  d.bytes.assign(rec.bytes.begin() + r.start, rec.bytes.begin() + r.end);
  if (r.kind == RegionKind::kPacket) {
    for (size_t j = i + 1; j < PacketGroupEnd(rec.regions, i); ++j) {
      d.nested.push_back(Region{rec.regions[j].start - r.start, rec.regions[j].end - r.start,
                                RegionKind::kFrame, false});
    }
  }
  return d;
}

struct Applier {
  SeedRecord& rec;

  size_t n() const { return rec.bytes.size(); }

  bool operator()(const op::BitFlip& o) const {
    const size_t bit = std::min(o.bit, n() * 8 - 1);
    rec.bytes[bit / 8] ^= static_cast<uint8_t>(0x80 >> (bit % 8));
    return true;
  }
  bool operator()(const op::ByteSet& o) const {
    rec.bytes[std::min(o.pos, n() - 1)] = o.value;
    return true;
  }
  bool operator()(const op::Arith& o) const {
    uint8_t& b = rec.bytes[std::min(o.pos, n() - 1)];
    b = static_cast<uint8_t>(b + o.delta);
    return true;
  }
  bool operator()(const op::InterestingValue& o) const {
    auto table = InterestingValues(o.width);
    if (table.empty() || o.width > n()) return false;
    const uint64_t v = static_cast<uint64_t>(table[o.index % table.size()]);
    const size_t pos = std::min(o.pos, n() - o.width);
    for (size_t k = 0; k < o.width; ++k) {
      rec.bytes[pos + k] = static_cast<uint8_t>(v >> (8 * (o.width - 1 - k)));
    }
    return true;
  }
  bool operator()(const op::BlockOverwrite& o) const {
    if (o.bytes.empty()) return false;
    const size_t pos = std::min(o.pos, n() - 1);
    const size_t len = std::min(o.bytes.size(), n() - pos);
    std::copy_n(o.bytes.begin(), len, rec.bytes.begin() + pos);
    return true;
  }
  bool operator()(const op::BlockInsert& o) const {
    if (o.bytes.empty()) return false;
    const size_t pos = std::min(o.pos, n());
    const size_t len = o.bytes.size();
    const size_t old_n = n();
    for (Region& r : rec.regions) {
      if (pos == old_n) {
        if (r.end == old_n) r.end += len;
      } else if (r.start <= pos && pos < r.end) {
        r.end += len;
      } else if (r.start > pos) {
        Shift(r, static_cast<int64_t>(len));
      }
    }
    rec.bytes.insert(rec.bytes.begin() + pos, o.bytes.begin(), o.bytes.end());
    return true;
  }
  bool operator()(const op::BlockDelete& o) const {
    const size_t pos = std::min(o.pos, n() - 1);
    const size_t len = std::min(o.len, n() - pos);
    if (len == 0 || len >= n()) return false;
    auto map = [&](size_t x) { return x <= pos ? x : x <= pos + len ? pos : x - len; };
    std::vector<Region> out;
    for (Region r : rec.regions) {
      r.start = map(r.start);
      r.end = map(r.end);
      if (r.start < r.end) out.push_back(r);
    }
    rec.regions = std::move(out);
    rec.bytes.erase(rec.bytes.begin() + pos, rec.bytes.begin() + pos + len);
    return true;
  }
  bool operator()(const op::RegionDelete& o) const {
    if (o.index >= rec.regions.size()) return false;
    const Region r = rec.regions[o.index];
    if (r.size() >= n()) return false;
    if (r.kind == RegionKind::kPacket) {
      EraseRegions(rec, o.index, PacketGroupEnd(rec.regions, o.index), r.start, r.end, std::nullopt);
    } else {
      EraseRegions(rec, o.index, o.index + 1, r.start, r.end, EnclosingPacket(rec.regions, o.index));
    }
    return true;
  }
  bool operator()(const op::RegionInsert& o) const {
    if (o.index >= rec.regions.size() || o.donor.bytes.empty()) return false;
    const Region r = rec.regions[o.index];
    if (r.kind != o.donor.kind) return false;
    if (r.kind == RegionKind::kPacket) {
      InsertDonor(rec, r.start, o.donor, o.index, std::nullopt);
    } else {
      InsertDonor(rec, r.start, o.donor, o.index, EnclosingPacket(rec.regions, o.index));
    }
    return true;
  }
  bool operator()(const op::RegionDuplicate& o) const {
    if (o.index >= rec.regions.size()) return false;
    const Region r = rec.regions[o.index];
    const Donor d = DonorFrom(rec, o.index);
    if (r.kind == RegionKind::kPacket) {
      InsertDonor(rec, r.end, d, PacketGroupEnd(rec.regions, o.index), std::nullopt);
    } else {
      InsertDonor(rec, r.end, d, o.index + 1, EnclosingPacket(rec.regions, o.index));
    }
    return true;
  }
  bool operator()(const op::RegionReplace& o) const {
    if (o.index >= rec.regions.size() || o.donor.bytes.empty()) return false;
    const Region r = rec.regions[o.index];
    if (r.kind != o.donor.kind) return false;
    if (r.kind == RegionKind::kPacket) {
      EraseRegions(rec, o.index, PacketGroupEnd(rec.regions, o.index), r.start, r.end, std::nullopt);
      InsertDonor(rec, r.start, o.donor, o.index, std::nullopt);
    } else {
      const size_t enclosing = EnclosingPacket(rec.regions, o.index);
      EraseRegions(rec, o.index, o.index + 1, r.start, r.end, enclosing);
      InsertDonor(rec, r.start, o.donor, o.index, enclosing);
    }
    return true;
  }
};

std::string FormatDonor(const Donor& d) {
  std::ostringstream os;
  os << (d.kind == RegionKind::kPacket ? 'p' : 'f') << ' ' << (d.opaque ? 1 : 0) << ' '
     << ToHex(d.bytes) << ' ';
  if (d.nested.empty()) {
    os << '-';
  } else {
    for (size_t i = 0; i < d.nested.size(); ++i) {
      os << (i ? "," : "") << d.nested[i].start << ':' << d.nested[i].end;
    }
  }
  return os.str();
}

Donor ParseDonor(std::istringstream& in) {
  Donor d;
  char kind = 0;
  int opaque = 0;
  std::string hex;
  std::string nested;
  if (!(in >> kind >> opaque >> hex >> nested)) throw Error(Errc::kMalformed, "donor");
  d.kind = kind == 'p' ? RegionKind::kPacket : RegionKind::kFrame;
  d.opaque = opaque != 0;
  d.bytes = FromHex(hex);
  if (nested != "-") {
    std::istringstream ns(nested);
    std::string item;
    while (std::getline(ns, item, ',')) {
      const size_t colon = item.find(':');
      if (colon == std::string::npos) throw Error(Errc::kMalformed, "nested region " + item);
      d.nested.push_back(Region{std::stoul(item.substr(0, colon)),
                                std::stoul(item.substr(colon + 1)), RegionKind::kFrame, false});
    }
  }
  return d;
}

Bytes RandomBlock(const SeedRecord& rec, Rng& rng, size_t len) {
  Bytes out(len);
  if (rng.Chance(0.5) && rec.bytes.size() >= len) {
    const size_t from = rng.Below(rec.bytes.size() - len + 1);
    std::copy_n(rec.bytes.begin() + from, len, out.begin());
  } else {
    for (auto& b : out) b = static_cast<uint8_t>(rng.Next());
  }
  return out;
}

bool IsRegionOp(const MutationOp& op) {
  return std::holds_alternative<op::RegionReplace>(op) ||
         std::holds_alternative<op::RegionInsert>(op) ||
         std::holds_alternative<op::RegionDuplicate>(op) ||
         std::holds_alternative<op::RegionDelete>(op);
}

// Shared by Mutate and ReplayOps so both see identical region tables.
class Editor {
 public:
  explicit Editor(SeedSequence& seq) : seq_(seq), dirty_(seq.records.size(), false) {}

  SeedRecord& Fresh(size_t record) {
    if (dirty_[record]) {
      RecomputeFrameRegions(seq_.records[record], seq_.context.client_short_dcid);
      dirty_[record] = false;
    }
    return seq_.records[record];
  }

  bool Apply(const LoggedOp& lop) {
    if (lop.record >= seq_.records.size() ||
        seq_.records[lop.record].direction != Direction::kClientToServer ||
        seq_.records[lop.record].bytes.empty()) {
      return false;
    }
    SeedRecord& rec = IsRegionOp(lop.op) ? Fresh(lop.record) : seq_.records[lop.record];
    if (!std::visit(Applier{rec}, lop.op)) return false;
    if (seq_.decrypted) dirty_[lop.record] = true;
    return true;
  }

  void Finish() {
    for (size_t i = 0; i < dirty_.size(); ++i) Fresh(i);
  }

 private:
  SeedSequence& seq_;
  std::vector<bool> dirty_;
};

std::optional<LoggedOp> Draw(Editor& ed, const SeedSequence& seq,
                             const std::vector<size_t>& clients, Rng& rng,
                             const MutationBudget& budget, const DonorPool& donors) {
  LoggedOp lop;
  lop.record = clients[rng.Below(clients.size())];
  if (rng.Chance(budget.region_op_probability)) {
    const SeedRecord& rec = ed.Fresh(lop.record);
    if (rec.regions.empty()) return std::nullopt;
    const size_t i = rng.Below(rec.regions.size());
    const RegionKind kind = rec.regions[i].kind;
    switch (rng.Below(4)) {
      case 0:
      case 1: {
        const Donor* d = donors.Pick(kind, rng);
        if (!d) return std::nullopt;
        if (rng.Below(2) == 0) {
          lop.op = op::RegionReplace{i, *d};
        } else {
          lop.op = op::RegionInsert{i, *d};
        }
        break;
      }
      case 2: lop.op = op::RegionDuplicate{i}; break;
      default: lop.op = op::RegionDelete{i}; break;
    }
    return lop;
  }
  const SeedRecord& rec = seq.records[lop.record];
  const size_t n = rec.bytes.size();
  const size_t block = std::max<size_t>(1, std::min(budget.max_block, n));
  switch (rng.Below(7)) {
    case 0: lop.op = op::BitFlip{rng.Below(n * 8)}; break;
    case 1: lop.op = op::ByteSet{rng.Below(n), static_cast<uint8_t>(rng.Next())}; break;
    case 2: {
      int delta = static_cast<int>(rng.Below(35)) + 1;
      if (rng.Chance(0.5)) delta = -delta;
      lop.op = op::Arith{rng.Below(n), delta};
      break;
    }
    case 3: {
      static constexpr uint8_t kWidths[] = {1, 2, 4};
      const uint8_t width = kWidths[rng.Below(3)];
      lop.op = op::InterestingValue{rng.Below(n), width, rng.Below(InterestingValues(width).size())};
      break;
    }
    case 4: {
      const size_t len = 1 + rng.Below(block);
      const size_t pos = rng.Below(n - len + 1);
      lop.op = op::BlockOverwrite{pos, RandomBlock(rec, rng, len)};
      break;
    }
    case 5: {
      const size_t len = 1 + rng.Below(budget.max_block);
      lop.op = op::BlockInsert{rng.Below(n + 1), RandomBlock(rec, rng, len)};
      break;
    }
    default: {
      const size_t len = 1 + rng.Below(block);
      lop.op = op::BlockDelete{rng.Below(n), len};
      break;
    }
  }
  return lop;
}

uint32_t DrawVersion(Rng& rng) {
  switch (rng.Below(8)) {
    case 0: return kQuicVersion1;
    case 1: return 0;
    case 2:
    case 3: return static_cast<uint32_t>(rng.Next());
    default: {
      // Reserved 0x?a?a?a?a pattern.
      uint32_t v = static_cast<uint32_t>(rng.Next()) & 0xf0f0f0f0u;
      return v | 0x0a0a0a0au;
    }
  }
}

}  // namespace

std::span<const int64_t> InterestingValues(uint8_t width) {
  switch (width) {
    case 1: return kInteresting8;
    case 2: return kInteresting16;
    case 4: return kInteresting32;
    default: return {};
  }
}

std::string FormatOp(const LoggedOp& lop) {
  std::ostringstream os;
  os << 'r' << lop.record << ' ';
  std::visit(
      [&os](const auto& o) {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, op::BitFlip>) {
          os << "bitflip " << o.bit;
        } else if constexpr (std::is_same_v<T, op::ByteSet>) {
          os << "set " << o.pos << ' ' << int{o.value};
        } else if constexpr (std::is_same_v<T, op::Arith>) {
          os << "arith " << o.pos << ' ' << o.delta;
        } else if constexpr (std::is_same_v<T, op::InterestingValue>) {
          os << "interesting " << o.pos << ' ' << int{o.width} << ' ' << o.index;
        } else if constexpr (std::is_same_v<T, op::BlockOverwrite>) {
          os << "overwrite " << o.pos << ' ' << ToHex(o.bytes);
        } else if constexpr (std::is_same_v<T, op::BlockInsert>) {
          os << "insert " << o.pos << ' ' << ToHex(o.bytes);
        } else if constexpr (std::is_same_v<T, op::BlockDelete>) {
          os << "delete " << o.pos << ' ' << o.len;
        } else if constexpr (std::is_same_v<T, op::RegionReplace>) {
          os << "region-replace " << o.index << ' ' << FormatDonor(o.donor);
        } else if constexpr (std::is_same_v<T, op::RegionInsert>) {
          os << "region-insert " << o.index << ' ' << FormatDonor(o.donor);
        } else if constexpr (std::is_same_v<T, op::RegionDuplicate>) {
          os << "region-dup " << o.index;
        } else {
          os << "region-del " << o.index;
        }
      },
      lop.op);
  return os.str();
}

LoggedOp ParseOp(const std::string& text) {
  std::istringstream in(text);
  std::string rec;
  std::string name;
  LoggedOp lop;
  auto bad = [&] { return Error(Errc::kMalformed, "op '" + text + "'"); };
  if (!(in >> rec >> name) || rec.size() < 2 || rec[0] != 'r') throw bad();
  try {
    lop.record = std::stoul(rec.substr(1));
    size_t a = 0;
    if (name == "bitflip") {
      if (!(in >> a)) throw bad();
      lop.op = op::BitFlip{a};
    } else if (name == "set") {
      int v = 0;
      if (!(in >> a >> v)) throw bad();
      lop.op = op::ByteSet{a, static_cast<uint8_t>(v)};
    } else if (name == "arith") {
      int d = 0;
      if (!(in >> a >> d)) throw bad();
      lop.op = op::Arith{a, d};
    } else if (name == "interesting") {
      int w = 0;
      size_t idx = 0;
      if (!(in >> a >> w >> idx)) throw bad();
      lop.op = op::InterestingValue{a, static_cast<uint8_t>(w), idx};
    } else if (name == "overwrite" || name == "insert") {
      std::string hex;
      if (!(in >> a >> hex)) throw bad();
      if (name == "overwrite") {
        lop.op = op::BlockOverwrite{a, FromHex(hex)};
      } else {
        lop.op = op::BlockInsert{a, FromHex(hex)};
      }
    } else if (name == "delete") {
      size_t len = 0;
      if (!(in >> a >> len)) throw bad();
      lop.op = op::BlockDelete{a, len};
    } else if (name == "region-replace" || name == "region-insert") {
      if (!(in >> a)) throw bad();
      Donor d = ParseDonor(in);
      if (name == "region-replace") {
        lop.op = op::RegionReplace{a, std::move(d)};
      } else {
        lop.op = op::RegionInsert{a, std::move(d)};
      }
    } else if (name == "region-dup") {
      if (!(in >> a)) throw bad();
      lop.op = op::RegionDuplicate{a};
    } else if (name == "region-del") {
      if (!(in >> a)) throw bad();
      lop.op = op::RegionDelete{a};
    } else {
      throw bad();
    }
  } catch (const std::logic_error&) {
    throw bad();
  }
  return lop;
}

bool ApplyOp(SeedRecord& record, const MutationOp& op) {
  if (record.bytes.empty()) return false;
  return std::visit(Applier{record}, op);
}

void DonorPool::Add(const SeedSequence& seq) {
  for (const SeedRecord& rec : seq.records) {
    if (rec.direction != Direction::kClientToServer) continue;
    for (size_t i = 0; i < rec.regions.size(); ++i) {
      Donor d = DonorFrom(rec, i);
      Bytes key = d.bytes;
      key.push_back(static_cast<uint8_t>(d.kind));
      key.push_back(d.opaque);
      if (!seen_.insert(Fnv1a64(key)).second) continue;
      (d.kind == RegionKind::kPacket ? packets_ : frames_).push_back(std::move(d));
    }
  }
}

const Donor* DonorPool::Pick(RegionKind kind, Rng& rng) const {
  const auto& list = kind == RegionKind::kPacket ? packets_ : frames_;
  if (list.empty()) return nullptr;
  return &list[rng.Below(list.size())];
}

SeedSequence Mutate(const SeedSequence& parent, Rng& rng, const MutationBudget& budget,
                    const DonorPool& donors) {
  SeedSequence m = parent;
  m.parent = parent.id;
  m.id.clear();
  m.ops.clear();
  m.new_edges = m.new_states = m.selections = 0;

  std::vector<size_t> clients;
  for (size_t i = 0; i < m.records.size(); ++i) {
    if (m.records[i].direction == Direction::kClientToServer && !m.records[i].bytes.empty()) {
      clients.push_back(i);
    }
  }
  if (clients.empty()) return m;

  Editor ed(m);
  const size_t stack = size_t{1} << rng.Below(budget.max_stack_log2 + 1);
  for (size_t s = 0; s < stack; ++s) {
    for (int attempt = 0; attempt < 8; ++attempt) {
      auto lop = Draw(ed, m, clients, rng, budget, donors);
      if (lop && ed.Apply(*lop)) {
        m.ops.push_back(FormatOp(*lop));
        break;
      }
    }
  }
  if (rng.Chance(budget.version_probability)) {
    const size_t first = clients.front();
    const SeedRecord& rec = m.records[first];
    if (!rec.regions.empty() && rec.regions[0].size() >= 5 && (rec.bytes[0] & 0x80)) {
      const uint32_t v = DrawVersion(rng);
      Bytes b = {static_cast<uint8_t>(v >> 24), static_cast<uint8_t>(v >> 16),
                 static_cast<uint8_t>(v >> 8), static_cast<uint8_t>(v)};
      LoggedOp lop{first, op::BlockOverwrite{1, std::move(b)}};
      if (ed.Apply(lop)) m.ops.push_back(FormatOp(lop));
    }
  }
  ed.Finish();
  return m;
}

SeedSequence ReplayOps(const SeedSequence& parent, const std::vector<std::string>& ops) {
  SeedSequence m = parent;
  m.parent = parent.id;
  m.id.clear();
  m.ops.clear();
  m.new_edges = m.new_states = m.selections = 0;
  Editor ed(m);
  for (const std::string& text : ops) {
    LoggedOp lop = ParseOp(text);
    if (ed.Apply(lop)) m.ops.push_back(text);
  }
  ed.Finish();
  return m;
}

}  // namespace quicfuzz
