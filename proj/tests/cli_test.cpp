// Copyright 2026 The aiom Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
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

#include "aiom/config.hpp"
#include "test_support.hpp"

namespace aiom {
namespace {

namespace fs = std::filesystem;
using testing::fixture;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("aiom-cli-" + std::to_string(::getpid()) + "-" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int cli(const std::string& args) const {
    const std::string cmd = std::string(AIOM_CLI_PATH) + " " + args + " > " + (dir_ / "stdout").string() + " 2> " +
                            (dir_ / "stderr").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string out() const { return read_file(dir_ / "stdout"); }
  std::string err() const { return read_file(dir_ / "stderr"); }

  fs::path dir_;
};

const std::string kTask = "'Describe the reading level.'";

TEST_F(Cli, RunWritesTranscript) {
  const auto o = dir_ / "run";
  ASSERT_EQ(cli("run -c " + fixture("golden/echo_config.json").string() + " -t " + kTask + " -o " + o.string()), 0)
      << err();
  EXPECT_EQ(out(), "This article reads at grade 7.\n");
  const auto t = Transcript::from_jsonl(read_file(o / "transcript.jsonl"));
  EXPECT_TRUE(t.holds_invariants());
  EXPECT_EQ(t.events.size(), 5u);
}

TEST_F(Cli, RunMatchesGoldenTranscript) {
  const auto o = dir_ / "run";
  ASSERT_EQ(cli("run -c " + fixture("golden/echo_config.json").string() + " -t " + kTask + " -o " + o.string()), 0);
  EXPECT_EQ(read_file(o / "transcript.jsonl"), read_file(fixture("golden/transcript.jsonl")));
}

TEST_F(Cli, MissingConfigIsUsageError) {
  EXPECT_EQ(cli("run -t x"), 1);
  EXPECT_NE(err().find("aiom: error:"), std::string::npos);
  EXPECT_EQ(cli("run -c " + (dir_ / "nope.json").string() + " -t x"), 1);
}

TEST_F(Cli, BadConfigIsUsageError) {
  write_file(dir_ / "bad.json", "{\"machine\": \"m\", \"oracel\": []}");
  EXPECT_EQ(cli("run -c " + (dir_ / "bad.json").string() + " -t x"), 1);
  EXPECT_NE(err().find("oracel"), std::string::npos);
}

TEST_F(Cli, FixtureGapIsBackendError) {
  write_file(dir_ / "gap.json", R"({"machine": "m", "controller": {"id": "echo"},
    "oracles": [{"role": "r", "backend": {"kind": "scripted", "params": {"rules": [{"contains": "zzz", "response": "x"}]}}}]})");
  EXPECT_EQ(cli("run -c " + (dir_ / "gap.json").string() + " -t hello -o " + dir_.string()), 3);
  EXPECT_TRUE(fs::exists(dir_ / "transcript.jsonl"));
}

TEST_F(Cli, FailedValidationIsRunError) {
  write_file(dir_ / "inv.json", R"({"machine": "m", "controller": {"id": "echo",
    "params": {"validator": {"validator": "numeric-range", "params": {"min": 1, "max": 2}}}},
    "oracles": [{"role": "r", "backend": {"kind": "scripted", "params": {"rules": [{"pattern": "^", "response": "nine"}]}}}]})");
  EXPECT_EQ(cli("run -c " + (dir_ / "inv.json").string() + " -t hello -o " + dir_.string()), 2);
}

TEST_F(Cli, ReplayAcceptsRecordedRun) {
  const auto config = fixture("golden/echo_config.json").string();
  ASSERT_EQ(cli("run -c " + config + " -t " + kTask + " -o " + dir_.string()), 0);
  ASSERT_EQ(cli("replay --transcript " + (dir_ / "transcript.jsonl").string() + " -c " + config), 0) << err();
  EXPECT_EQ(out(), "replay: ok (5 events)\n");
}

TEST_F(Cli, ReplayRejectsEditedTranscript) {
  const auto config = fixture("golden/echo_config.json").string();
  auto text = read_file(fixture("golden/transcript.jsonl"));
  const auto at = text.find("grade 7");
  ASSERT_NE(at, std::string::npos);
  text.replace(at, 7, "grade 8");
  write_file(dir_ / "edited.jsonl", text);
  EXPECT_EQ(cli("replay --transcript " + (dir_ / "edited.jsonl").string() + " -c " + config), 2);
  EXPECT_NE(err().find("replay"), std::string::npos);
}

TEST_F(Cli, SimulateIsReproducible) {
  const std::string args = " --articles 200 --trials 2 --seed 9 --csv";
  ASSERT_EQ(cli("simulate -o " + (dir_ / "a").string() + args), 0) << err();
  ASSERT_EQ(cli("simulate -o " + (dir_ / "b").string() + args), 0);
  const auto report = read_file(dir_ / "a" / "report.json");
  EXPECT_EQ(report, read_file(dir_ / "b" / "report.json"));
  EXPECT_EQ(read_file(dir_ / "a" / "trials.csv"), read_file(dir_ / "b" / "trials.csv"));
  EXPECT_EQ(Json::parse(report)["n_trials"], 2);
}

TEST_F(Cli, AraWithScriptedOracles) {
  const auto refs = dir_ / "refs.jsonl";
  std::vector<ara::LabeledArticle> corpus;
  for (int g = ara::kMinGrade; g <= ara::kMaxGrade; ++g) {
    corpus.push_back({"r" + std::to_string(g), "Reference text " + std::to_string(g) + ".", std::nullopt, "news", g});
  }
  write_file(refs, ara::emit_corpus(corpus));
  write_file(dir_ / "in.txt", "Input article.\n");
  Json cmp = Json::array();
  for (int g = ara::kMinGrade; g <= ara::kMaxGrade; ++g) {
    cmp.push_back({{"contains", "- document \"r" + std::to_string(g) + "\":"}, {"response", g < 9 ? "harder" : g > 9 ? "easier" : "same"}});
  }
  auto scripted = [](Json rules) { return Json{{"kind", "scripted"}, {"params", {{"rules", std::move(rules)}}}}; };
  const Json config = {
      {"machine", "ara"},
      {"controller", {{"id", "ara"}}},
      {"oracles",
       {{{"role", "genre-assessor"}, {"backend", scripted({{{"pattern", "^"}, {"response", "news"}}})}},
        {{"role", "grade-assessor-b0"}, {"backend", scripted({{{"pattern", "^"}, {"response", "6"}}})}},
        {{"role", "text-comparator"}, {"backend", scripted(cmp)}}}}};
  write_file(dir_ / "ara.json", config.dump());
  ASSERT_EQ(cli("ara -a " + (dir_ / "in.txt").string() + " --refs " + refs.string() + " -k 1 -c " +
                (dir_ / "ara.json").string() + " -o " + dir_.string()),
            0)
      << err();
  const auto report = Json::parse(read_file(dir_ / "report.json"));
  EXPECT_EQ(report.dump().find("\"final_grade\":9") != std::string::npos, true) << report.dump();
}

}  // namespace
}  // namespace aiom
