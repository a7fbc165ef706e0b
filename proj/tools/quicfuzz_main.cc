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

// quicfuzz command line: fuzz, replay, decrypt-seed, stats and record.
//
// Exit codes: 0 ok, 1 a crash was found or reproduced, 2 usage error,
// 3 runtime error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "quicfuzz/executor.h"
#include "quicfuzz/reference_server.h"
#include "quicfuzz/scheduler.h"
#include "quicfuzz/session_recorder.h"

namespace quicfuzz {
namespace {

constexpr int kExitOk = 0;
constexpr int kExitCrash = 1;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FuzzArgs {
  std::string seed_dir;
  std::string secrets;
  std::string manifest;
  std::string mode = "full";
  uint64_t execs = 0;
  double seconds = 0;
  uint64_t rng_seed = 0;
  std::string out = "quicfuzz-out";
  std::vector<std::string> stop_on;
};

struct ReplayArgs {
  std::string artifact;
  std::string manifest;
  int runs = 1;
};

struct DecryptArgs {
  std::string capture;
  std::string secrets;
};

struct RecordArgs {
  std::string script = "basic";
  std::string out = "corpus";
};

std::string Join(const std::vector<std::string>& items, const char* sep) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += sep;
    out += s;
  }
  return out;
}

std::string ReadText(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIoFailure, "cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

int RunFuzz(const FuzzArgs& args) {
  Mode mode;
  try {
    mode = ParseMode(args.mode);
  } catch (const Error&) {
    throw UsageError("unknown mode '" + args.mode + "'");
  }
  const ModeFlags flags = FlagsOf(mode);
  if (flags.crypto && args.secrets.empty()) {
    throw UsageError("--secrets is required in mode " + args.mode);
  }
  if (args.execs == 0 && args.seconds <= 0) throw UsageError("one of --execs or --seconds is required");

  std::optional<SecretsConfig> secrets;
  if (flags.crypto) secrets = SecretsConfig::Load(args.secrets);
  ServerConfig target;
  if (!args.manifest.empty()) target = ServerConfig::Load(args.manifest);

  CampaignConfig config;
  config.mode = mode;
  config.rng_seed = args.rng_seed;
  if (args.execs) config.max_execs = args.execs;
  if (args.seconds > 0) config.max_time = std::chrono::milliseconds(static_cast<int64_t>(args.seconds * 1000));
  config.out_dir = args.out;
  config.stop_on_failures = args.stop_on;
  const auto bugs = target.EnabledBugs();
  config.artifact_tags = {{"bugs", bugs.empty() ? "none" : Join(bugs, ",")},
                          {"init_delay_ms", std::to_string(target.init_delay_ms)}};

  Campaign campaign(config, LoadCorpus(args.seed_dir, secrets ? &*secrets : nullptr),
                    ReferenceFactory(target));
  const CampaignReport report = campaign.Run();
  std::cout << report.Summary();
  return report.crashes.empty() ? kExitOk : kExitCrash;
}

ServerConfig TargetFromMeta(const ArtifactMeta& meta) {
  std::string manifest;
  for (const char* key : {"paradigm", "bugs", "init_delay_ms"}) {
    auto it = meta.extra.find(key);
    if (it != meta.extra.end()) manifest += std::string(key) + "=" + it->second + "\n";
  }
  return ServerConfig::Parse(manifest);
}

int RunReplay(const ReplayArgs& args) {
  if (args.runs < 1) throw UsageError("--runs must be positive");
  const LoadedArtifact artifact = LoadArtifact(args.artifact);
  const ServerConfig target =
      args.manifest.empty() ? TargetFromMeta(artifact.meta) : ServerConfig::Load(args.manifest);
  ExecutorOptions options;
  options.mode = Mode::kFull;
  Executor executor(ReferenceFactory(target), options);
  executor.Prepare();
  bool crashed = false;
  for (int i = 0; i < args.runs; ++i) {
    const RunOutcome outcome = executor.Run(artifact.sequence);
    std::cout << "run " << (i + 1) << ": " << OutcomeName(outcome.kind);
    if (outcome.kind == OutcomeKind::kCrash) {
      std::cout << " " << outcome.failure_id;
      crashed = true;
    }
    std::cout << " last_state=" << FormatStateCode(outcome.last_code())
              << " trace=" << FormatTrace(outcome.trace) << "\n";
  }
  return crashed ? kExitCrash : kExitOk;
}

std::string_view TlsMessageName(uint8_t type) {
  switch (type) {
    case 1: return "ClientHello";
    case 2: return "ServerHello";
    case 4: return "NewSessionTicket";
    case 8: return "EncryptedExtensions";
    case 11: return "Certificate";
    case 13: return "CertificateRequest";
    case 15: return "CertificateVerify";
    case 20: return "Finished";
    default: return "Unknown";
  }
}

void DumpTlsMessages(const Bytes& data) {
  size_t pos = 0;
  while (pos + 4 <= data.size()) {
    const size_t len = size_t{data[pos + 1]} << 16 | size_t{data[pos + 2]} << 8 | data[pos + 3];
    std::cout << "        tls " << TlsMessageName(data[pos]) << " (" << len << " bytes)";
    if (pos + 4 + len > data.size()) {
      std::cout << " continues past this frame\n";
      return;
    }
    std::cout << "\n";
    pos += 4 + len;
  }
}

void DumpPacket(const SeedRecord& record, const Region& region, size_t short_dcid) {
  const ByteSpan bytes = ByteSpan(record.bytes).subspan(region.start, region.size());
  if (region.opaque) {
    std::cout << "    packet [" << region.start << "," << region.end << ") OPAQUE "
              << region.size() << " bytes\n";
    return;
  }
  const PlainPacket packet = ParsePlainPacket(bytes, short_dcid);
  std::cout << "    packet [" << region.start << "," << region.end << ") "
            << PacketTypeName(packet.header.type) << " level=" << LevelName(packet.level)
            << " pn=" << packet.packet_number() << "\n";
  size_t padding = 0;
  auto flush_padding = [&] {
    if (padding) std::cout << "      PADDING x" << padding << "\n";
    padding = 0;
  };
  for (const Frame& frame : packet.frames) {
    if (std::holds_alternative<PaddingFrame>(frame)) {
      ++padding;
      continue;
    }
    flush_padding();
    std::cout << "      " << DescribeFrame(frame) << "\n";
    if (const auto* crypto = std::get_if<CryptoFrame>(&frame)) DumpTlsMessages(crypto->data);
  }
  flush_padding();
  std::cout << "      payload " << ToHex(packet.payload) << "\n";
}

int RunDecrypt(const DecryptArgs& args) {
  const auto raw = ImportCapture(args.capture);
  std::shared_ptr<const SecretSet> keys = std::make_shared<SecretSet>();
  std::shared_ptr<const SecretsConfig> config;
  if (!args.secrets.empty()) {
    auto cfg = std::make_shared<SecretsConfig>(SecretsConfig::Load(args.secrets));
    keys = std::make_shared<SecretSet>(InstallSecrets(*cfg));
    config = std::move(cfg);
  }
  const SeedSequence seq = DecryptSequence(raw, keys, config);
  std::cout << "initial_dcid " << ToHex(seq.context.initial_dcid) << "\n";
  for (size_t i = 0; i < seq.records.size(); ++i) {
    const SeedRecord& record = seq.records[i];
    std::cout << "record " << i << " "
              << (record.direction == Direction::kClientToServer ? "client->server" : "server->client")
              << " " << record.bytes.size() << " bytes\n";
    for (const Region& region : record.regions) {
      if (region.kind != RegionKind::kPacket) continue;
      DumpPacket(record, region, seq.context.ShortDcidLen(record.direction));
    }
  }
  return kExitOk;
}

int RunStats(const std::string& dir) {
  const std::filesystem::path root(dir);
  std::cout << ReadText(root / "report.txt");
  const std::string csv = ReadText(root / "coverage.csv");
  std::istringstream in(csv);
  std::string line;
  std::string last;
  size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line.rfind("timestamp", 0) == 0) continue;
    last = line;
    ++rows;
  }
  std::cout << "csv_rows: " << rows << "\n";
  if (!last.empty()) std::cout << "csv_final: " << last << "\n";
  for (const char* sub : {"queue", "crashes"}) {
    size_t n = 0;
    std::error_code ec;
    for (const auto& e : std::filesystem::directory_iterator(root / sub, ec)) {
      if (e.path().extension() == ".seed") ++n;
    }
    std::cout << sub << "_artifacts: " << n << "\n";
  }
  return kExitOk;
}

int RunRecord(const RecordArgs& args) {
  SessionScript script;
  try {
    script = ParseSessionScript(args.script);
  } catch (const Error&) {
    throw UsageError("unknown script '" + args.script + "'");
  }
  const RecordedFiles files = WriteSession(RecordSession(script), script, args.out);
  std::cout << "capture " << files.capture.string() << "\n"
            << "secrets " << files.secrets.string() << "\n";
  return kExitOk;
}

int Main(int argc, char** argv) {
  CLI::App app{"QUIC greybox fuzzer"};
  app.require_subcommand(1);

  FuzzArgs fuzz;
  auto* fuzz_cmd = app.add_subcommand("fuzz", "Run a fuzzing campaign");
  fuzz_cmd->add_option("--seed-dir", fuzz.seed_dir, "Directory of .seed captures")->required();
  fuzz_cmd->add_option("--secrets", fuzz.secrets, "Handshake and 1-RTT secrets file");
  fuzz_cmd->add_option("--target-manifest", fuzz.manifest, "Reference target manifest");
  fuzz_cmd->add_option("--mode", fuzz.mode, "baseline, crypto, crypto+sync or full");
  fuzz_cmd->add_option("--execs", fuzz.execs, "Fuzzing executions");
  fuzz_cmd->add_option("--seconds", fuzz.seconds, "Wall clock budget");
  fuzz_cmd->add_option("--rng-seed", fuzz.rng_seed, "Random seed");
  fuzz_cmd->add_option("--out", fuzz.out, "Output directory");
  fuzz_cmd->add_option("--stop-on", fuzz.stop_on, "Stop once these failure ids were seen")
      ->delimiter(',');

  ReplayArgs replay;
  auto* replay_cmd = app.add_subcommand("replay", "Replay a saved artifact");
  replay_cmd->add_option("artifact", replay.artifact, "Path to the .seed file")->required();
  replay_cmd->add_option("--target-manifest", replay.manifest, "Override the recorded target");
  replay_cmd->add_option("--runs", replay.runs, "Number of replays");

  DecryptArgs decrypt;
  auto* decrypt_cmd = app.add_subcommand("decrypt-seed", "Dump the packets of a capture");
  decrypt_cmd->add_option("capture", decrypt.capture, "Capture file")->required();
  decrypt_cmd->add_option("--secrets", decrypt.secrets, "Handshake and 1-RTT secrets file");

  std::string stats_dir;
  auto* stats_cmd = app.add_subcommand("stats", "Summarize a campaign directory");
  stats_cmd->add_option("dir", stats_dir, "Campaign output directory")->required();

  RecordArgs record;
  auto* record_cmd = app.add_subcommand("record", "Record a session with the reference target");
  record_cmd->add_option("--script", record.script, "basic or no-finished");
  record_cmd->add_option("--out", record.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*fuzz_cmd) return RunFuzz(fuzz);
    if (*replay_cmd) return RunReplay(replay);
    if (*decrypt_cmd) return RunDecrypt(decrypt);
    if (*stats_cmd) return RunStats(stats_dir);
    if (*record_cmd) return RunRecord(record);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace
}  // namespace quicfuzz

int main(int argc, char** argv) { return quicfuzz::Main(argc, argv); }
