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

// The campaign loop: select a state, select a seed reaching it, mutate,
// execute, keep what finds new coverage or new states, log crashes.

#ifndef QUICFUZZ_SCHEDULER_H_
#define QUICFUZZ_SCHEDULER_H_

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "quicfuzz/coverage.h"
#include "quicfuzz/executor.h"
#include "quicfuzz/mutation.h"

namespace quicfuzz {

struct EnergyConfig {
  uint32_t base = 32;
  uint32_t cap = 512;
  uint32_t max_bonus = 3;
  uint32_t new_state_bonus = 2;
  uint32_t new_edge_bonus = 1;
  uint32_t fresh_bonus = 1;
  uint64_t decay_after = 8;  // own discoveries stop counting after this many rounds
};

struct CampaignConfig {
  Mode mode = Mode::kFull;
  uint64_t rng_seed = 0;
  std::optional<uint64_t> max_execs;
  std::optional<std::chrono::milliseconds> max_time;
  std::filesystem::path out_dir;  // empty: keep nothing on disk
  MutationBudget budget;
  SelectionWeights weights;
  EnergyConfig energy;
  // Stop as soon as every listed failure id has been seen.
  std::vector<std::string> stop_on_failures;
  // Extra metadata written next to every saved artifact.
  std::map<std::string, std::string> artifact_tags;
  std::chrono::milliseconds csv_interval{1000};
  std::chrono::milliseconds rendezvous_timeout{1000};
  AsyncOptions async;
};

struct QueueEntry {
  SeedSequence seq;
  std::set<StateCode> states;
  uint64_t fuzz_rounds = 0;
  uint64_t yield_edges = 0;
  uint64_t yield_states = 0;
};

// Mutants for one selection of `entry`.
uint32_t AssignEnergy(const QueueEntry& entry, const EnergyConfig& config);

struct Evaluation {
  CoverageDelta coverage;
  size_t new_states = 0;
  bool interesting() const { return coverage.interesting() || new_states > 0; }
};

// Merges the run into the global map and the state machine.
Evaluation Evaluate(const RunOutcome& outcome, GlobalCoverage& global, StateMachine& machine);

struct CrashRecord {
  std::string failure_id;
  StateCode last_code = kStartState;
  uint64_t first_exec = 0;
  double first_seconds = 0;
  uint64_t count = 0;
  std::filesystem::path artifact;
};

// Crash buckets keyed by (failure id, last state code).
class CrashLog {
 public:
  // Returns true when the key is new.
  bool Add(const RunOutcome& outcome, uint64_t exec, double seconds);
  CrashRecord& Last() { return *last_; }
  const std::map<std::pair<std::string, StateCode>, CrashRecord>& records() const {
    return records_;
  }
  bool Seen(std::string_view failure_id) const;
  size_t size() const { return records_.size(); }

 private:
  std::map<std::pair<std::string, StateCode>, CrashRecord> records_;
  CrashRecord* last_ = nullptr;
};

struct CsvRow {
  double seconds = 0;
  uint64_t execs = 0;
  size_t edges = 0;
  size_t states = 0;
  size_t crashes = 0;
};

std::string CsvHeader();
std::string FormatCsvRow(const CsvRow& row);

struct CampaignReport {
  Mode mode = Mode::kFull;
  uint64_t rng_seed = 0;
  uint64_t execs = 0;  // dry run included
  uint64_t fuzz_execs = 0;
  double seconds = 0;
  size_t edges = 0;
  size_t states = 0;
  size_t corpus = 0;
  uint64_t hangs = 0;
  uint64_t coverage_hash = 0;
  std::vector<CrashRecord> crashes;
  std::vector<CsvRow> series;
  std::string state_edges;
  AdapterStats adapter;

  double execs_per_second() const { return seconds > 0 ? execs / seconds : 0; }
  bool Found(std::string_view failure_id) const;
  std::string Summary() const;
};

// Loads every *.seed capture in `dir`, in name order. With `secrets` the
// captures are decrypted; without, they stay wire images.
std::vector<SeedSequence> LoadCorpus(const std::filesystem::path& dir,
                                     const SecretsConfig* secrets);

class Campaign {
 public:
  Campaign(CampaignConfig config, std::vector<SeedSequence> corpus, ProgramFactory factory);

  // Throws Error(kCorpusEmpty | kTargetUnavailable).
  CampaignReport Run();

  const GlobalCoverage& coverage() const { return global_; }
  const StateMachine& machine() const { return machine_; }
  const std::vector<QueueEntry>& queue() const { return queue_; }

 private:
  size_t PickEntry(StateCode state);
  void Admit(SeedSequence seq, const RunOutcome& outcome, const Evaluation& eval);
  void HandleCrash(const SeedSequence& seq, const RunOutcome& outcome);
  void Save(const SeedSequence& seq, const std::string& outcome, const std::string& subdir,
            std::map<std::string, std::string> extra, std::filesystem::path* path);
  double Elapsed() const;
  bool BudgetLeft() const;
  void Checkpoint(bool force);

  CampaignConfig config_;
  std::vector<SeedSequence> initial_;
  Executor executor_;
  Rng rng_;
  GlobalCoverage global_;
  StateMachine machine_;
  DonorPool donors_;
  CrashLog crashes_;
  std::vector<QueueEntry> queue_;
  std::map<StateCode, uint64_t> state_picks_;
  CampaignReport report_;
  std::chrono::steady_clock::time_point start_;
  double last_row_ = -1;
  bool stop_ = false;
};

}  // namespace quicfuzz

#endif  // QUICFUZZ_SCHEDULER_H_
