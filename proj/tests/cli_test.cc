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


#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "test_util.h"

namespace quicfuzz {
namespace {

namespace fs = std::filesystem;

struct CliResult {
  int exit_code = -1;
  std::string out;
};

CliResult Cli(const std::string& args) {
  static int counter = 0;
  const fs::path log =
      fs::temp_directory_path() / ("quicfuzz_cli_" + std::to_string(++counter) + ".log");
  const std::string cmd =
      std::string(QUICFUZZ_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  fs::remove(log);
  return r;
}

std::string Field(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(key, 0) == 0) return line.substr(key.size());
  }
  return "";
}

size_t Count(const std::string& text, const std::string& needle) {
  size_t n = 0;
  for (size_t p = text.find(needle); p != std::string::npos; p = text.find(needle, p + 1)) ++n;
  return n;
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(testing::TempDir("cli"));
    ASSERT_EQ(Cli("record --script basic --out " + corpus().string()).exit_code, 0);
    ASSERT_EQ(Cli("record --script no-finished --out " + corpus().string()).exit_code, 0);
  }
  static void TearDownTestSuite() { delete dir_; }

  static fs::path corpus() { return *dir_ / "corpus"; }
  static std::string secrets() { return (corpus() / "reference.secrets").string(); }
  static fs::path Manifest(const std::string& name, const std::string& text) {
    const fs::path p = *dir_ / name;
    std::ofstream(p) << text;
    return p;
  }
  static std::string Fuzz(const std::string& extra) {
    return "fuzz --seed-dir " + corpus().string() + " --secrets " + secrets() + " " + extra;
  }

  static fs::path* dir_;
};

fs::path* CliTest::dir_ = nullptr;

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(Cli("").exit_code, 2);
  EXPECT_EQ(Cli("fuzz").exit_code, 2);
  EXPECT_EQ(Cli("fuzz --seed-dir " + corpus().string() + " --execs 10").exit_code, 2);
  EXPECT_EQ(Cli(Fuzz("")).exit_code, 2);
  EXPECT_EQ(Cli(Fuzz("--execs 10 --mode turbo")).exit_code, 2);
  EXPECT_EQ(Cli("frobnicate").exit_code, 2);
  EXPECT_EQ(Cli("--help").exit_code, 0);
}

TEST_F(CliTest, RuntimeErrors) {
  const fs::path bogus = *dir_ / "bogus.seed";
  std::ofstream(bogus) << "definitely not a capture";
  const CliResult r = Cli("decrypt-seed " + bogus.string());
  EXPECT_EQ(r.exit_code, 3);
  EXPECT_NE(r.out.find("error:"), std::string::npos);
  EXPECT_EQ(Cli("replay " + (*dir_ / "missing.seed").string()).exit_code, 3);
  EXPECT_EQ(Cli(Fuzz("--execs 10 --target-manifest " +
                     Manifest("bad.manifest", "bugs=heap\n").string()))
                .exit_code,
            3);
}

TEST_F(CliTest, DecryptSeedDump) {
  const CliResult r =
      Cli("decrypt-seed " + (corpus() / "basic.seed").string() + " --secrets " + secrets());
  ASSERT_EQ(r.exit_code, 0) << r.out;
  EXPECT_NE(r.out.find("initial_dcid 8394c8f03e515708"), std::string::npos);
  EXPECT_NE(r.out.find("tls ClientHello"), std::string::npos);
  EXPECT_NE(r.out.find("tls Finished"), std::string::npos);
  EXPECT_NE(r.out.find("HANDSHAKE_DONE"), std::string::npos);
  EXPECT_NE(r.out.find("CONNECTION_CLOSE"), std::string::npos);
  EXPECT_NE(r.out.find("PADDING x917"), std::string::npos);
  EXPECT_EQ(r.out.find("OPAQUE"), std::string::npos);

  const CliResult bare = Cli("decrypt-seed " + (corpus() / "basic.seed").string());
  ASSERT_EQ(bare.exit_code, 0);
  EXPECT_NE(bare.out.find("tls ClientHello"), std::string::npos);
  EXPECT_EQ(Count(bare.out, "OPAQUE"), 5u);

  const fs::path wrong = *dir_ / "wrong.secrets";
  {
    std::string text = testing::Decrypted(RecordSession(SessionScript::kBasic))
                           .context.config->Serialize();
    for (char& c : text) {
      if (c == 'a') c = 'b';
    }
    std::ofstream(wrong) << text;
  }
  const CliResult mismatched =
      Cli("decrypt-seed " + (corpus() / "basic.seed").string() + " --secrets " + wrong.string());
  ASSERT_EQ(mismatched.exit_code, 0);
  EXPECT_EQ(Count(mismatched.out, "OPAQUE"), 5u);
}

TEST_F(CliTest, FuzzIsReproducible) {
  const fs::path a = *dir_ / "run_a";
  const fs::path b = *dir_ / "run_b";
  ASSERT_EQ(Cli(Fuzz("--execs 1000 --rng-seed 7 --out " + a.string())).exit_code, 0);
  ASSERT_EQ(Cli(Fuzz("--execs 1000 --rng-seed 7 --out " + b.string())).exit_code, 0);
  const std::string final_a = Field(Cli("stats " + a.string()).out, "csv_final: ");
  const std::string final_b = Field(Cli("stats " + b.string()).out, "csv_final: ");
  ASSERT_FALSE(final_a.empty());
  EXPECT_EQ(final_a.substr(final_a.find(',')), final_b.substr(final_b.find(',')));
}

TEST_F(CliTest, BaselineMissesDeepBugs) {
  const fs::path m = Manifest("deep.manifest", "bugs=ack-drain,stream-null\n");
  const fs::path out = *dir_ / "baseline";
  const CliResult r = Cli("fuzz --seed-dir " + corpus().string() + " --mode baseline --execs 500 "
                          "--target-manifest " + m.string() + " --out " + out.string());
  EXPECT_EQ(r.exit_code, 0) << r.out;
  EXPECT_EQ(Field(Cli("stats " + out.string()).out, "crashes_artifacts: "), "0");
}

TEST_F(CliTest, CrashReplaysDeterministically) {
  const fs::path m = Manifest("drain.manifest", "paradigm=rbs\nbugs=ack-drain\n");
  const fs::path out = *dir_ / "drain";
  const CliResult r = Cli(Fuzz("--execs 30000 --rng-seed 1 --stop-on ack-drain --target-manifest " +
                               m.string() + " --out " + out.string()));
  ASSERT_EQ(r.exit_code, 1) << r.out;
  fs::path crash;
  for (const auto& e : fs::directory_iterator(out / "crashes")) {
    if (e.path().extension() == ".seed") crash = e.path();
  }
  ASSERT_FALSE(crash.empty());
  const CliResult replay = Cli("replay " + crash.string() + " --runs 10");
  EXPECT_EQ(replay.exit_code, 1);
  EXPECT_EQ(Count(replay.out, "crash ack-drain"), 10u) << replay.out;
}

TEST_F(CliTest, QueueEntryReplaysClean) {
  const fs::path out = *dir_ / "clean";
  ASSERT_EQ(Cli(Fuzz("--execs 300 --out " + out.string())).exit_code, 0);
  fs::path entry;
  for (const auto& e : fs::directory_iterator(out / "queue")) {
    if (e.path().extension() == ".seed") entry = e.path();
  }
  ASSERT_FALSE(entry.empty());
  const CliResult replay = Cli("replay " + entry.string() + " --runs 3");
  EXPECT_EQ(replay.exit_code, 0) << replay.out;
  EXPECT_EQ(Count(replay.out, ": ok"), 3u);
}

}  // namespace
}  // namespace quicfuzz
