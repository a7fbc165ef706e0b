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

#include "quicfuzz/scheduler.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace quicfuzz {
namespace {

using Clock = std::chrono::steady_clock;

std::string FormatSeconds(double s) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", s);
  return buf;
}

void WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
  if (!out) throw Error(Errc::kIoFailure, "cannot write " + path.string());
}

}  // namespace

uint32_t AssignEnergy(const QueueEntry& entry, const EnergyConfig& c) {
  const bool fresh = entry.fuzz_rounds == 0;
  const bool own = entry.fuzz_rounds < c.decay_after;
  const bool new_state = (own && entry.seq.new_states > 0) || entry.yield_states > 0;
  const bool new_edge = (own && entry.seq.new_edges > 0) || entry.yield_edges > 0;
  const uint32_t bonus = std::min(c.max_bonus, new_state * c.new_state_bonus +
                                                   new_edge * c.new_edge_bonus +
                                                   fresh * c.fresh_bonus);
  return std::min(c.cap, c.base << bonus);
}

Evaluation Evaluate(const RunOutcome& outcome, GlobalCoverage& global, StateMachine& machine) {
  Evaluation e;
  e.coverage = global.Merge(outcome.coverage);
  const size_t before = machine.size();
  machine.Update(outcome.codes);
  e.new_states = machine.size() - before;
  return e;
}

bool CrashLog::Add(const RunOutcome& outcome, uint64_t exec, double seconds) {
  auto [it, inserted] = records_.try_emplace({outcome.failure_id, outcome.last_code()});
  CrashRecord& r = it->second;
  if (inserted) {
    r.failure_id = outcome.failure_id;
    r.last_code = outcome.last_code();
    r.first_exec = exec;
    r.first_seconds = seconds;
  }
  ++r.count;
  last_ = &r;
  return inserted;
}

bool CrashLog::Seen(std::string_view failure_id) const {
  return std::any_of(records_.begin(), records_.end(),
                     [&](const auto& kv) { return kv.first.first == failure_id; });
}

std::string CsvHeader() { return "timestamp,execs,edges,states,crashes"; }

std::string FormatCsvRow(const CsvRow& row) {
  return FormatSeconds(row.seconds) + "," + std::to_string(row.execs) + "," +
         std::to_string(row.edges) + "," + std::to_string(row.states) + "," +
         std::to_string(row.crashes);
}

bool CampaignReport::Found(std::string_view failure_id) const {
  return std::any_of(crashes.begin(), crashes.end(),
                     [&](const CrashRecord& c) { return c.failure_id == failure_id; });
}

std::string CampaignReport::Summary() const {
  std::ostringstream os;
  os << "mode: " << ModeName(mode) << "\n"
     << "rng_seed: " << rng_seed << "\n"
     << "execs: " << execs << "\n"
     << "fuzz_execs: " << fuzz_execs << "\n"
     << "seconds: " << FormatSeconds(seconds) << "\n"
     << "execs_per_second: " << FormatSeconds(execs_per_second()) << "\n"
     << "edges: " << edges << "\n"
     << "states: " << states << "\n"
     << "corpus: " << corpus << "\n"
     << "hangs: " << hangs << "\n"
     << "crashes: " << crashes.size() << "\n";
  for (const CrashRecord& c : crashes) {
    os << "crash: " << c.failure_id << " state=" << FormatStateCode(c.last_code)
       << " count=" << c.count << " first_exec=" << c.first_exec;
    if (!c.artifact.empty()) os << " artifact=" << c.artifact.string();
    os << "\n";
  }
  os << "adapter: " << adapter.Line() << "\n";
  return os.str();
}

std::vector<SeedSequence> LoadCorpus(const std::filesystem::path& dir,
                                     const SecretsConfig* secrets) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    throw Error(Errc::kIoFailure, "not a directory: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".seed") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::shared_ptr<const SecretSet> keys;
  std::shared_ptr<const SecretsConfig> config;
  if (secrets) {
    keys = std::make_shared<SecretSet>(InstallSecrets(*secrets));
    config = std::make_shared<SecretsConfig>(*secrets);
  }
  std::vector<SeedSequence> corpus;
  for (const auto& f : files) {
    const std::vector<RawRecord> raw = ImportCapture(f);
    SeedSequence seq = secrets ? DecryptSequence(raw, keys, config) : WireSequence(raw);
    seq.id = f.stem().string();
    corpus.push_back(std::move(seq));
  }
  return corpus;
}

Campaign::Campaign(CampaignConfig config, std::vector<SeedSequence> corpus,
                   ProgramFactory factory)
    : config_(std::move(config)),
      initial_(std::move(corpus)),
      executor_(std::move(factory),
                ExecutorOptions{config_.mode, config_.rendezvous_timeout,
                                std::chrono::milliseconds(10000), config_.async}),
      rng_(config_.rng_seed) {}

double Campaign::Elapsed() const {
  return std::chrono::duration<double>(Clock::now() - start_).count();
}

bool Campaign::BudgetLeft() const {
  if (stop_) return false;
  if (config_.max_execs && report_.fuzz_execs >= *config_.max_execs) return false;
  if (config_.max_time &&
      Clock::now() - start_ >= std::chrono::duration_cast<Clock::duration>(*config_.max_time)) {
    return false;
  }
  return config_.max_execs || config_.max_time;
}

void Campaign::Checkpoint(bool force) {
  const double t = Elapsed();
  if (!force && last_row_ >= 0 &&
      t - last_row_ < std::chrono::duration<double>(config_.csv_interval).count()) {
    return;
  }
  last_row_ = t;
  report_.series.push_back(
      CsvRow{t, report_.execs, global_.edges(), machine_.size(), crashes_.size()});
}

void Campaign::Save(const SeedSequence& seq, const std::string& outcome,
                    const std::string& subdir, std::map<std::string, std::string> extra,
                    std::filesystem::path* path) {
  if (config_.out_dir.empty()) return;
  ArtifactMeta meta;
  meta.outcome = outcome;
  meta.parent = seq.parent;
  meta.ops = seq.ops;
  meta.timestamp = FormatSeconds(Elapsed());
  meta.extra = std::move(extra);
  for (const auto& [k, v] : config_.artifact_tags) meta.extra.emplace(k, v);
  meta.extra["mode"] = std::string(ModeName(config_.mode));
  meta.extra["paradigm"] = std::string(ParadigmName(executor_.paradigm()));
  SavedArtifact saved = SaveInteresting(seq, meta, config_.out_dir / subdir);
  if (path) *path = saved.seed_path;
}

void Campaign::Admit(SeedSequence seq, const RunOutcome& outcome, const Evaluation& eval) {
  seq.new_edges = eval.coverage.new_buckets;
  seq.new_states = eval.new_states;
  QueueEntry entry;
  entry.states.insert(outcome.codes.begin(), outcome.codes.end());
  donors_.Add(seq);
  if (!seq.parent.empty()) {
    Save(seq, eval.new_states ? "new-state" : "new-coverage", "queue", {}, nullptr);
  }
  entry.seq = std::move(seq);
  queue_.push_back(std::move(entry));
}

void Campaign::HandleCrash(const SeedSequence& seq, const RunOutcome& outcome) {
  if (!crashes_.Add(outcome, report_.execs, Elapsed())) return;
  CrashRecord& r = crashes_.Last();
  Save(seq, "crash", "crashes",
       {{"failure_id", outcome.failure_id}, {"last_state", FormatStateCode(outcome.last_code())}},
       &r.artifact);
  if (!config_.stop_on_failures.empty() &&
      std::all_of(config_.stop_on_failures.begin(), config_.stop_on_failures.end(),
                  [this](const std::string& id) { return crashes_.Seen(id); })) {
    stop_ = true;
  }
}

size_t Campaign::PickEntry(StateCode state) {
  size_t best = queue_.size();
  for (size_t i = 0; i < queue_.size(); ++i) {
    if (state != kStartState && !queue_[i].states.count(state)) continue;
    if (best == queue_.size() || queue_[i].seq.selections < queue_[best].seq.selections) best = i;
  }
  if (best == queue_.size()) {
    best = 0;
    for (size_t i = 1; i < queue_.size(); ++i) {
      if (queue_[i].seq.selections < queue_[best].seq.selections) best = i;
    }
  }
  ++queue_[best].seq.selections;
  return best;
}

CampaignReport Campaign::Run() {
  if (initial_.empty()) throw Error(Errc::kCorpusEmpty, "seed corpus is empty");
  executor_.Prepare();
  start_ = Clock::now();
  report_.mode = config_.mode;
  report_.rng_seed = config_.rng_seed;

  std::vector<std::chrono::nanoseconds> times;
  for (SeedSequence& seq : initial_) {
    RunOutcome o = executor_.Run(seq);
    ++report_.execs;
    times.push_back(o.exec_time);
    const Evaluation ev = Evaluate(o, global_, machine_);
    if (o.kind == OutcomeKind::kHang) ++report_.hangs;
    if (o.kind == OutcomeKind::kCrash) {
      HandleCrash(seq, o);
      continue;
    }
    Admit(seq, o, ev);
  }
  if (queue_.empty()) {
    throw Error(Errc::kCorpusEmpty, "every seed crashed or hung during the dry run");
  }
  if (!executor_.flags().sync) {
    std::sort(times.begin(), times.end());
    const auto median = std::chrono::duration_cast<std::chrono::milliseconds>(times[times.size() / 2]);
    executor_.set_hang_timeout(std::max(std::chrono::milliseconds(100), median * 20));
  }
  Checkpoint(true);

  uint64_t next_id = 0;
  while (BudgetLeft()) {
    const StateCode state = machine_.Select(config_.weights);
    const size_t idx = PickEntry(state);
    const uint32_t energy = AssignEnergy(queue_[idx], config_.energy);
    for (uint32_t k = 0; k < energy && BudgetLeft(); ++k) {
      SeedSequence mutant = Mutate(queue_[idx].seq, rng_, config_.budget, donors_);
      char id[24];
      std::snprintf(id, sizeof(id), "id:%06llu", static_cast<unsigned long long>(next_id++));
      mutant.id = id;
      RunOutcome o = executor_.Run(mutant);
      ++report_.execs;
      ++report_.fuzz_execs;
      const Evaluation ev = Evaluate(o, global_, machine_);
      if (o.kind == OutcomeKind::kHang) {
        ++report_.hangs;
      } else if (o.kind == OutcomeKind::kCrash) {
        HandleCrash(mutant, o);
      } else if (ev.interesting()) {
        if (ev.coverage.interesting()) ++queue_[idx].yield_edges;
        if (ev.new_states) ++queue_[idx].yield_states;
        Admit(std::move(mutant), o, ev);
      }
      Checkpoint(false);
    }
    ++queue_[idx].fuzz_rounds;
    machine_.MarkFuzzed(state);
  }

  Checkpoint(true);
  report_.seconds = Elapsed();
  report_.edges = global_.edges();
  report_.states = machine_.size();
  report_.corpus = queue_.size();
  report_.coverage_hash = Fnv1a64(global_.bits());
  report_.state_edges = machine_.ExportEdges();
  report_.adapter = executor_.stats();
  for (const auto& [key, record] : crashes_.records()) report_.crashes.push_back(record);

  if (!config_.out_dir.empty()) {
    std::filesystem::create_directories(config_.out_dir);
    WriteText(config_.out_dir / "report.txt", report_.Summary());
    std::string csv = CsvHeader() + "\n";
    for (const CsvRow& row : report_.series) csv += FormatCsvRow(row) + "\n";
    WriteText(config_.out_dir / "coverage.csv", csv);
    WriteText(config_.out_dir / "state_edges.txt", report_.state_edges);
  }
  return report_;
}

}  // namespace quicfuzz
