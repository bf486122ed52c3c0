// Copyright 2026 The Pref Arena Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("pref-arena-cli-" + std::to_string(::getpid()) + "-" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(const std::string& args) {
    const std::string command = std::string(PREF_ARENA_CLI) + " " + args + " >" +
                                (dir_ / "stdout.txt").string() + " 2>" +
                                (dir_ / "stderr.txt").string();
    const int status = std::system(command.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string read(const fs::path& path) const {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream text;
    text << in.rdbuf();
    return text.str();
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(CliTest, EmptyDatasetNeedsAllowPrior) {
  std::ofstream(dir_ / "empty.jsonl").close();
  EXPECT_EQ(run("fit --input " + path("empty.jsonl") + " --out " + path("fit")), 1);
  EXPECT_NE(read(dir_ / "stderr.txt").find("ConfigError"), std::string::npos)
      << read(dir_ / "stderr.txt");
}

TEST_F(CliTest, AllowPriorFitsUnobservedMetric) {
  std::ofstream(dir_ / "one.jsonl")
      << R"({"id":"a","metric":"overall","model_a":"m1","model_b":"m2","outcome":"A","rater":{"country":"US","age":[],"ethnicity":[],"politics":[]}})"
      << "\n";
  const std::string base = "fit --chains 2 --draws 100 --warmup 100 --metrics trust --input " +
                            path("one.jsonl") + " --out " + path("prior");
  EXPECT_EQ(run(base), 1);
  EXPECT_NE(read(dir_ / "stderr.txt").find("ConfigError"), std::string::npos);
  EXPECT_EQ(run(base + " --allow-prior"), 0) << read(dir_ / "stderr.txt");
  EXPECT_TRUE(fs::exists(dir_ / "prior" / "draws_trust.jsonl"));
}

TEST_F(CliTest, BadInputReportsLine) {
  std::ofstream(dir_ / "bad.jsonl")
      << R"({"id":"a","metric":"o","model_a":"m","model_b":"m","outcome":"A","rater":{"country":"US","age":[],"ethnicity":[],"politics":[]}})"
      << "\n";
  EXPECT_EQ(run("ingest --input " + path("bad.jsonl") + " --out " + path("o")), 1);
  EXPECT_NE(read(dir_ / "stderr.txt").find("line 1"), std::string::npos);
}

TEST_F(CliTest, SimulateFitReportPipeline) {
  const std::string sim = path("sim");
  ASSERT_EQ(run("simulate --seed 3 --models 5 --comparisons 2000 --tie-rate 0.25 --out " + sim),
            0)
      << read(dir_ / "stderr.txt");
  for (const char* name : {"dataset.jsonl", "truth.json", "census.json"}) {
    EXPECT_TRUE(fs::exists(dir_ / "sim" / name)) << name;
  }
  const std::string data = sim + "/dataset.jsonl";
  ASSERT_EQ(run("ingest --input " + data + " --out " + path("ingested")), 0);
  EXPECT_EQ(read(dir_ / "ingested" / "dataset.jsonl"), read(dir_ / "sim" / "dataset.jsonl"));

  const std::string fit_args = "fit --seed 11 --chains 4 --draws 300 --warmup 300 --input " + data;
  ASSERT_EQ(run(fit_args + " --out " + path("fit1")), 0) << read(dir_ / "stderr.txt");
  ASSERT_EQ(run(fit_args + " --out " + path("fit2")), 0);
  const std::string draws = read(dir_ / "fit1" / "draws_overall.jsonl");
  EXPECT_FALSE(draws.empty());
  EXPECT_EQ(draws, read(dir_ / "fit2" / "draws_overall.jsonl"));
  const auto diagnostics =
      nlohmann::json::parse(read(dir_ / "fit1" / "diagnostics_overall.json"));
  EXPECT_LE(diagnostics["max_rhat"].get<double>(), 1.05);

  const std::string report = "leaderboard --draws-dir " + path("fit1") + " --census " + sim +
                             "/census.json --input " + data;
  ASSERT_EQ(run(report + " --out " + path("rep1")), 0) << read(dir_ / "stderr.txt");
  ASSERT_EQ(run(report + " --out " + path("rep2")), 0);
  for (const char* name : {"leaderboard.md", "leaderboard.csv", "rank_shift.csv",
                           "tie_rates.csv", "decomposition_summary.csv"}) {
    const std::string first = read(dir_ / "rep1" / name);
    EXPECT_FALSE(first.empty()) << name;
    EXPECT_EQ(first, read(dir_ / "rep2" / name)) << name;
    EXPECT_EQ(first.find("nan"), std::string::npos) << name;
  }
  EXPECT_NE(read(dir_ / "rep1" / "leaderboard.md")
                .find("| Model | Score | 95% CI | Expected Rank | P(best) |"),
            std::string::npos);

  ASSERT_EQ(run("decompose --input " + data + " --out " + path("dec")), 0)
      << read(dir_ / "stderr.txt");
  EXPECT_TRUE(fs::exists(dir_ / "dec" / "decomposition_summary.csv"));
}

TEST_F(CliTest, LeaderboardWithoutDrawsFails) {
  fs::create_directories(dir_ / "none");
  EXPECT_EQ(run("leaderboard --draws-dir " + path("none") + " --out " + path("r")), 1);
  EXPECT_NE(read(dir_ / "stderr.txt").find("MissingDraws"), std::string::npos)
      << read(dir_ / "stderr.txt");
}

}  // namespace
