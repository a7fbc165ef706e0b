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

#include "quicfuzz/seed.h"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace quicfuzz {
namespace {

constexpr char kMagic[] = "QFSEED1\n";
constexpr size_t kMagicLength = 8;

Bytes ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIoFailure, "cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void WriteFile(const std::filesystem::path& path, ByteSpan data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(Errc::kIoFailure, "cannot write " + path.string());
}

void WriteText(const std::filesystem::path& path, const std::string& text) {
  WriteFile(path, ByteSpan(reinterpret_cast<const uint8_t*>(text.data()), text.size()));
}

// DCID and SCID of the first packet in a record, if it is a v1 long header.
std::optional<PacketHeader> FirstLongHeader(const Bytes& bytes) {
  if (bytes.empty()) return std::nullopt;
  try {
    HeaderLayout layout = ParseHeader(bytes, 0);
    if (!layout.header.is_long() || layout.header.version != kQuicVersion1) return std::nullopt;
    return layout.header;
  } catch (const Error&) {
    return std::nullopt;
  }
}

Region PacketRegion(size_t start, size_t end, bool opaque) {
  return Region{start, end, RegionKind::kPacket, opaque};
}

SeedRecord OpaqueRecord(const RawRecord& raw, size_t short_dcid_len) {
  SeedRecord rec{raw.direction, raw.bytes, {}};
  if (raw.bytes.empty()) return rec;
  try {
    Datagram dg = SplitDatagram(raw.bytes, short_dcid_len);
    for (const auto& p : dg.packets) rec.regions.push_back(PacketRegion(p.start, p.end, true));
    if (dg.trailing_padding) {
      rec.regions.push_back(PacketRegion(raw.bytes.size() - dg.trailing_padding,
                                         raw.bytes.size(), true));
    }
  } catch (const Error&) {
    rec.regions.assign(1, PacketRegion(0, raw.bytes.size(), true));
  }
  return rec;
}

std::string RegionLine(size_t record, const Region& r) {
  std::ostringstream os;
  os << record << ' ' << r.start << ' ' << r.end << ' '
     << (r.kind == RegionKind::kPacket ? 'p' : 'f') << ' ' << (r.opaque ? 1 : 0);
  return os.str();
}

std::string ContextLines(const SeedSequence& seq) {
  std::ostringstream os;
  os << "encoding=" << (seq.decrypted ? "plain" : "wire") << "\n"
     << "initial_dcid=" << ToHex(seq.context.initial_dcid) << "\n"
     << "client_short_dcid=" << seq.context.client_short_dcid << "\n"
     << "server_short_dcid=" << seq.context.server_short_dcid << "\n";
  for (size_t i = 0; i < seq.records.size(); ++i) {
    for (const Region& r : seq.records[i].regions) os << "region=" << RegionLine(i, r) << "\n";
  }
  return os.str();
}

}  // namespace

std::vector<RawRecord> ParseCapture(ByteSpan data) {
  if (data.size() < kMagicLength ||
      !std::equal(data.begin(), data.begin() + kMagicLength, kMagic)) {
    throw Error(Errc::kBadMagic, "not a QFSEED1 capture");
  }
  std::vector<RawRecord> records;
  size_t pos = kMagicLength;
  while (pos < data.size()) {
    if (data.size() - pos < 5) throw Error(Errc::kTruncatedRecord, "record header");
    const uint8_t dir = data[pos];
    if (dir > 1) throw Error(Errc::kTruncatedRecord, "direction byte " + std::to_string(dir));
    const uint32_t len = uint32_t{data[pos + 1]} << 24 | uint32_t{data[pos + 2]} << 16 |
                         uint32_t{data[pos + 3]} << 8 | data[pos + 4];
    pos += 5;
    if (data.size() - pos < len) {
      throw Error(Errc::kTruncatedRecord,
                  "record of " + std::to_string(len) + " bytes at offset " + std::to_string(pos));
    }
    records.push_back({static_cast<Direction>(dir), Bytes(data.begin() + pos, data.begin() + pos + len)});
    pos += len;
  }
  return records;
}

Bytes SerializeCapture(const std::vector<RawRecord>& records) {
  Bytes out(kMagic, kMagic + kMagicLength);
  for (const auto& r : records) {
    out.push_back(static_cast<uint8_t>(r.direction));
    const uint32_t len = static_cast<uint32_t>(r.bytes.size());
    for (int i = 3; i >= 0; --i) out.push_back(static_cast<uint8_t>(len >> (8 * i)));
    out.insert(out.end(), r.bytes.begin(), r.bytes.end());
  }
  return out;
}

std::vector<RawRecord> ImportCapture(const std::filesystem::path& path) {
  return ParseCapture(ReadFile(path));
}

void ExportCapture(const std::filesystem::path& path, const std::vector<RawRecord>& records) {
  WriteFile(path, SerializeCapture(records));
}

std::optional<std::string> CheckRegions(const SeedRecord& record) {
  const size_t n = record.bytes.size();
  size_t next_packet = 0;
  const Region* packet = nullptr;
  size_t frame_floor = 0;
  for (size_t i = 0; i < record.regions.size(); ++i) {
    const Region& r = record.regions[i];
    const std::string where = "region " + std::to_string(i) + " [" + std::to_string(r.start) +
                              "," + std::to_string(r.end) + ")";
    if (r.start >= r.end) return where + " is empty";
    if (r.end > n) return where + " exceeds record of " + std::to_string(n);
    if (r.kind == RegionKind::kPacket) {
      if (r.start != next_packet) return where + " does not continue the packet tiling";
      next_packet = r.end;
      packet = &r;
      frame_floor = r.start;
    } else {
      if (!packet) return where + " precedes every packet";
      if (packet->opaque) return where + " inside an opaque packet";
      if (r.start < frame_floor || r.end > packet->end) return where + " escapes its packet";
      frame_floor = r.end;
    }
  }
  if (next_packet != n) return "packet regions cover " + std::to_string(next_packet) + " of " + std::to_string(n);
  return std::nullopt;
}

std::vector<Region> FrameRegions(ByteSpan payload, size_t base) {
  std::vector<Region> out;
  std::vector<size_t> ends;
  std::vector<Frame> frames;
  try {
    frames = ParseFrames(payload, &ends);
  } catch (const Error&) {
    return out;
  }
  size_t start = 0;
  bool prev_padding = false;
  for (size_t i = 0; i < frames.size(); ++i) {
    const bool padding = std::holds_alternative<PaddingFrame>(frames[i]);
    if (padding && prev_padding) {
      out.back().end = base + ends[i];
    } else {
      out.push_back(Region{base + start, base + ends[i], RegionKind::kFrame, false});
    }
    prev_padding = padding;
    start = ends[i];
  }
  return out;
}

void RecomputeFrameRegions(SeedRecord& record, size_t short_dcid_len) {
  std::vector<Region> out;
  for (const Region& r : record.regions) {
    if (r.kind != RegionKind::kPacket) continue;
    out.push_back(r);
    if (r.opaque) continue;
    ByteSpan image = ByteSpan(record.bytes).subspan(r.start, r.size());
    try {
      HeaderLayout layout = ParsePlainHeader(image, short_dcid_len);
      if (!layout.header.has_packet_number()) continue;
      auto frames = FrameRegions(image.subspan(layout.payload_offset), r.start + layout.payload_offset);
      out.insert(out.end(), frames.begin(), frames.end());
    } catch (const Error&) {
    }
  }
  record.regions = std::move(out);
}

SeedSequence DecryptSequence(const std::vector<RawRecord>& raw,
                             std::shared_ptr<const SecretSet> secrets,
                             std::shared_ptr<const SecretsConfig> config) {
  const RawRecord* first_client = nullptr;
  const RawRecord* first_server = nullptr;
  for (const auto& r : raw) {
    if (r.direction == Direction::kClientToServer && !first_client) first_client = &r;
    if (r.direction == Direction::kServerToClient && !first_server) first_server = &r;
  }
  std::optional<PacketHeader> initial;
  if (first_client) initial = FirstLongHeader(first_client->bytes);
  if (!initial || initial->type != PacketType::kInitial) {
    throw Error(Errc::kNoInitialPacket, "first client record has no Initial packet");
  }

  SeedSequence seq;
  seq.decrypted = true;
  seq.context.secrets = secrets ? std::move(secrets) : std::make_shared<SecretSet>();
  seq.context.config = std::move(config);
  seq.context.initial_dcid = initial->dcid;
  seq.context.server_short_dcid = initial->scid.size();
  seq.context.client_short_dcid = initial->dcid.size();
  if (first_server) {
    if (auto h = FirstLongHeader(first_server->bytes)) seq.context.client_short_dcid = h->scid.size();
  }
  const SecretSet keys = WithInitialSecrets(*seq.context.secrets, initial->dcid);

  for (const RawRecord& r : raw) {
    const size_t short_len = seq.context.ShortDcidLen(r.direction);
    SeedRecord rec{r.direction, {}, {}};
    Datagram dg;
    try {
      dg = SplitDatagram(r.bytes, short_len);
    } catch (const Error&) {
      seq.records.push_back(OpaqueRecord(r, short_len));
      continue;
    }
    for (const DatagramPacket& p : dg.packets) {
      ByteSpan wire = ByteSpan(r.bytes).subspan(p.start, p.end - p.start);
      const size_t start = rec.bytes.size();
      try {
        PlainPacket plain = Unprotect(wire, keys, r.direction, short_len);
        Bytes image = PlainImage(plain);
        const size_t header_len = image.size() - plain.payload.size();
        rec.bytes.insert(rec.bytes.end(), image.begin(), image.end());
        rec.regions.push_back(PacketRegion(start, rec.bytes.size(), false));
        auto frames = FrameRegions(plain.payload, start + header_len);
        rec.regions.insert(rec.regions.end(), frames.begin(), frames.end());
      } catch (const Error&) {
        rec.bytes.insert(rec.bytes.end(), wire.begin(), wire.end());
        rec.regions.push_back(PacketRegion(start, rec.bytes.size(), true));
      }
    }
    if (dg.trailing_padding) {
      const size_t start = rec.bytes.size();
      rec.bytes.insert(rec.bytes.end(), r.bytes.end() - dg.trailing_padding, r.bytes.end());
      rec.regions.push_back(PacketRegion(start, rec.bytes.size(), true));
    }
    seq.records.push_back(std::move(rec));
  }
  return seq;
}

SeedSequence WireSequence(const std::vector<RawRecord>& raw) {
  SeedSequence seq;
  seq.decrypted = false;
  seq.context.secrets = std::make_shared<SecretSet>();
  const RawRecord* first_client = nullptr;
  const RawRecord* first_server = nullptr;
  for (const auto& r : raw) {
    if (r.direction == Direction::kClientToServer && !first_client) first_client = &r;
    if (r.direction == Direction::kServerToClient && !first_server) first_server = &r;
  }
  if (first_client) {
    if (auto h = FirstLongHeader(first_client->bytes)) {
      seq.context.initial_dcid = h->dcid;
      seq.context.server_short_dcid = h->scid.size();
      seq.context.client_short_dcid = h->dcid.size();
    }
  }
  if (first_server) {
    if (auto h = FirstLongHeader(first_server->bytes)) seq.context.client_short_dcid = h->scid.size();
  }
  for (const RawRecord& r : raw) {
    seq.records.push_back(OpaqueRecord(r, seq.context.ShortDcidLen(r.direction)));
  }
  return seq;
}

SecretSet EncodingSecrets(const SeedSequence& seq) {
  const SecretSet base = seq.context.secrets ? *seq.context.secrets : SecretSet();
  Bytes dcid = seq.context.initial_dcid;
  for (const SeedRecord& rec : seq.records) {
    if (rec.direction != Direction::kClientToServer) continue;
    for (const Region& r : rec.regions) {
      if (r.kind != RegionKind::kPacket || r.opaque) continue;
      try {
        HeaderLayout layout =
            ParsePlainHeader(ByteSpan(rec.bytes).subspan(r.start, r.size()), seq.context.client_short_dcid);
        if (layout.header.type == PacketType::kInitial && !layout.header.dcid.empty()) {
          dcid = layout.header.dcid;
        }
      } catch (const Error&) {
      }
      break;
    }
    break;
  }
  if (dcid.empty()) return base;
  return WithInitialSecrets(base, dcid);
}

EncodedRecord EncodeRecord(const SeedRecord& record, const SecretSet& secrets,
                           size_t short_dcid_len) {
  EncodedRecord out;
  for (const Region& r : record.regions) {
    if (r.kind != RegionKind::kPacket) continue;
    ByteSpan bytes = ByteSpan(record.bytes).subspan(r.start, r.size());
    PacketSend send;
    send.offset = out.datagram.size();
    send.opaque = r.opaque;
    if (r.opaque) {
      out.datagram.insert(out.datagram.end(), bytes.begin(), bytes.end());
    } else {
      try {
        send.type = ParsePlainHeader(bytes, short_dcid_len).header.type;
      } catch (const Error&) {
      }
      ProtectionOutcome outcome = ProtectImage(bytes, secrets, record.direction, short_dcid_len);
      send.is_protected = outcome.is_protected;
      send.reason = outcome.reason;
      out.datagram.insert(out.datagram.end(), outcome.bytes.begin(), outcome.bytes.end());
    }
    send.size = out.datagram.size() - send.offset;
    out.packets.push_back(send);
  }
  return out;
}

std::vector<Bytes> EncodeClientRecords(const SeedSequence& seq,
                                       std::vector<EncodedRecord>* detail) {
  std::vector<Bytes> out;
  if (detail) detail->clear();
  const SecretSet keys = seq.decrypted ? EncodingSecrets(seq) : SecretSet();
  for (const SeedRecord& rec : seq.records) {
    if (rec.direction != Direction::kClientToServer) continue;
    if (!seq.decrypted) {
      out.push_back(rec.bytes);
      if (detail) {
        EncodedRecord e;
        e.datagram = rec.bytes;
        for (const Region& r : rec.regions) {
          if (r.kind != RegionKind::kPacket) continue;
          PacketSend send;
          send.opaque = true;
          send.offset = r.start;
          send.size = r.size();
          e.packets.push_back(send);
        }
        detail->push_back(std::move(e));
      }
      continue;
    }
    EncodedRecord e = EncodeRecord(rec, keys, seq.context.client_short_dcid);
    out.push_back(e.datagram);
    if (detail) detail->push_back(std::move(e));
  }
  return out;
}

std::vector<RawRecord> ToRawRecords(const SeedSequence& seq) {
  std::vector<RawRecord> out;
  for (const SeedRecord& rec : seq.records) out.push_back({rec.direction, rec.bytes});
  return out;
}

SavedArtifact SaveInteresting(const SeedSequence& seq, const ArtifactMeta& meta,
                              const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::kIoFailure, "cannot create " + dir.string());

  const Bytes capture = SerializeCapture(ToRawRecords(seq));
  const std::string context = ContextLines(seq);
  const std::string secrets =
      seq.context.config ? seq.context.config->Serialize() : std::string("# no secrets\n");
  Bytes hashed = capture;
  hashed.insert(hashed.end(), context.begin(), context.end());
  hashed.insert(hashed.end(), secrets.begin(), secrets.end());
  char name[17];
  std::snprintf(name, sizeof(name), "%016llx", static_cast<unsigned long long>(Fnv1a64(hashed)));

  SavedArtifact saved;
  saved.hash = name;
  saved.seed_path = dir / (saved.hash + ".seed");
  if (std::filesystem::exists(saved.seed_path)) {
    saved.deduplicated = true;
    return saved;
  }

  std::ostringstream m;
  m << "outcome=" << meta.outcome << "\n"
    << "parent=" << meta.parent << "\n"
    << "ops=" << meta.ops.size() << "\n";
  for (const auto& op : meta.ops) m << "op=" << op << "\n";
  m << "timestamp=" << meta.timestamp << "\n";
  for (const auto& [k, v] : meta.extra) m << k << "=" << v << "\n";
  m << context;

  WriteText(dir / (saved.hash + ".secrets"), secrets);
  WriteText(dir / (saved.hash + ".meta"), m.str());
  // The .seed file goes last so its presence marks a complete triple.
  WriteFile(saved.seed_path, capture);
  return saved;
}

LoadedArtifact LoadArtifact(const std::filesystem::path& path) {
  std::filesystem::path stem = path;
  stem.replace_extension();
  auto corrupt = [&](const std::string& why) {
    return Error(Errc::kCorruptArtifact, stem.string() + ": " + why);
  };
  LoadedArtifact out;
  std::vector<RawRecord> raw;
  std::string meta_text;
  std::string secrets_text;
  try {
    raw = ImportCapture(std::filesystem::path(stem).concat(".seed"));
    Bytes m = ReadFile(std::filesystem::path(stem).concat(".meta"));
    meta_text.assign(m.begin(), m.end());
    Bytes s = ReadFile(std::filesystem::path(stem).concat(".secrets"));
    secrets_text.assign(s.begin(), s.end());
  } catch (const Error& e) {
    throw corrupt(e.what());
  }

  SeedSequence& seq = out.sequence;
  for (auto& r : raw) seq.records.push_back(SeedRecord{r.direction, std::move(r.bytes), {}});
  std::istringstream in(meta_text);
  std::string line;
  size_t declared_ops = 0;
  while (std::getline(in, line)) {
    const size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    try {
      if (key == "outcome") {
        out.meta.outcome = value;
      } else if (key == "parent") {
        out.meta.parent = value;
      } else if (key == "ops") {
        declared_ops = std::stoul(value);
      } else if (key == "op") {
        out.meta.ops.push_back(value);
      } else if (key == "timestamp") {
        out.meta.timestamp = value;
      } else if (key == "encoding") {
        seq.decrypted = value == "plain";
      } else if (key == "initial_dcid") {
        seq.context.initial_dcid = FromHex(value);
      } else if (key == "client_short_dcid") {
        seq.context.client_short_dcid = std::stoul(value);
      } else if (key == "server_short_dcid") {
        seq.context.server_short_dcid = std::stoul(value);
      } else if (key == "region") {
        std::istringstream rs(value);
        size_t rec = 0;
        Region r;
        char kind = 0;
        int opaque = 0;
        if (!(rs >> rec >> r.start >> r.end >> kind >> opaque) || rec >= seq.records.size()) {
          throw corrupt("bad region line '" + value + "'");
        }
        r.kind = kind == 'f' ? RegionKind::kFrame : RegionKind::kPacket;
        r.opaque = opaque != 0;
        seq.records[rec].regions.push_back(r);
      } else {
        out.meta.extra[key] = value;
      }
    } catch (const Error& e) {
      if (e.code() == Errc::kCorruptArtifact) throw;
      throw corrupt(e.what());
    } catch (const std::exception&) {
      throw corrupt("bad value for " + key);
    }
  }
  if (declared_ops != out.meta.ops.size()) throw corrupt("op count mismatch");
  for (size_t i = 0; i < seq.records.size(); ++i) {
    if (auto why = CheckRegions(seq.records[i])) throw corrupt("record " + std::to_string(i) + ": " + *why);
  }
  seq.context.secrets = std::make_shared<SecretSet>();
  if (secrets_text.find('=') != std::string::npos) {
    try {
      auto cfg = std::make_shared<SecretsConfig>(SecretsConfig::Parse(secrets_text));
      seq.context.secrets = std::make_shared<SecretSet>(InstallSecrets(*cfg));
      seq.context.config = std::move(cfg);
    } catch (const Error& e) {
      throw corrupt(e.what());
    }
  }
  seq.parent = out.meta.parent;
  seq.ops = out.meta.ops;
  return out;
}

}  // namespace quicfuzz
