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

#include <atomic>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "aiom/backends.hpp"
#include "aiom/http_backend.hpp"
#include "test_support.hpp"

namespace aiom {
namespace {

Prompt prompt_with(const std::string& text) { return Prompt{text, "sections-v1", "r"}; }

TEST(ScriptedBackend, FirstMatchingRuleAnswers) {
  ScriptedBackend b("s", {{"grade?", false, "7"}, {"grade", false, "8"}});
  const auto a = b.query(prompt_with("what grade? tell me"), {0, "t"});
  EXPECT_EQ(a.text, "7");
  EXPECT_EQ(a.oracle_id, "s");
  EXPECT_EQ(a.query_task_id, "t");
}

TEST(ScriptedBackend, NoMatchIsAFixtureGap) {
  ScriptedBackend b("s", {{"grade?", false, "7"}});
  EXPECT_THROW(b.query(prompt_with("hello"), {0, "t"}), FixtureGapError);
}

TEST(ScriptedBackend, AnchoredPattern) {
  auto b = ScriptedBackend::from_params(
      "s", Json{{"rules", {{{"pattern", "^### DESCRIPTION\\nSay"}, {"response", "OK"}}}}});
  EXPECT_EQ(b->query(prompt_with("### DESCRIPTION\nSay OK\n"), {0, "t"}).text, "OK");
  EXPECT_THROW(b->query(prompt_with("x### DESCRIPTION\nSay"), {0, "t"}), FixtureGapError);
}

TEST(ScriptedBackend, ConfigErrors) {
  EXPECT_THROW(ScriptedBackend("s", {}), ConfigurationError);
  EXPECT_THROW(ScriptedBackend::from_params("s", Json{{"rules", {{{"response", "x"}}}}}), SchemaError);
  EXPECT_THROW(ScriptedBackend::from_params("s", Json{{"rules", {{{"pattern", "("}, {"response", "x"}}}}}),
               ConfigurationError);
}

// ---------------------------------------------------------------------------

std::shared_ptr<const LatentTable> latents() {
  auto t = std::make_shared<LatentTable>();
  (*t)["hard"] = Latent{9.0, "poetry", 9};
  (*t)["easy"] = Latent{4.0, "drama", 4};
  (*t)["mid"] = Latent{6.1, "drama", 6};
  (*t)["mid2"] = Latent{6.0, "poetry", 6};
  return t;
}

Prompt comparison_prompt(const std::string& a, const std::string& b) {
  QueryTask t;
  t.id = "cmp";
  t.description = "Compare.";
  t.context_excerpts = {{a, "x"}, {b, "y"}};
  GroundTruth truth;
  truth.documents = {{a, "", "x", {}}, {b, "", "y", {}}};
  return render_prompt(t, truth);
}

TEST(StochasticBackend, PerfectComparatorIsSignCorrect) {
  StochasticBackend c("c", "noisy-comparator", Json{{"p_correct", 1.0}}, latents());
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    EXPECT_EQ(c.query(comparison_prompt("hard", "easy"), {seed, "t"}).text, "harder");
    EXPECT_EQ(c.query(comparison_prompt("easy", "hard"), {seed, "t"}).text, "easier");
  }
}

TEST(StochasticBackend, TiesAnswerSame) {
  StochasticBackend c("c", "noisy-comparator", Json::object(), latents());
  EXPECT_EQ(c.query(comparison_prompt("mid", "mid2"), {1, "t"}).text, "same");
}

TEST(StochasticBackend, ComparatorAccuracyFollowsTheSlopeModel) {
  StochasticBackend c("c", "noisy-comparator", Json{{"slope", 0.15}}, latents());
  EXPECT_DOUBLE_EQ(c.comparator_accuracy(0.0), 0.5);
  EXPECT_DOUBLE_EQ(c.comparator_accuracy(2.0), 0.8);
  EXPECT_DOUBLE_EQ(c.comparator_accuracy(-5.0), 0.95);
  double prev = 0.0;
  for (double gap = 0.0; gap < 6.0; gap += 0.1) {
    EXPECT_GE(c.comparator_accuracy(gap), prev);
    prev = c.comparator_accuracy(gap);
  }
}

TEST(StochasticBackend, EmpiricalAccuracyMatchesModel) {
  StochasticBackend c("c", "noisy-comparator", Json{{"slope", 0.15}}, latents());
  int right = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    right += c.query(comparison_prompt("hard", "easy"), {7, "t" + std::to_string(i)}).text == "harder";
  }
  EXPECT_NEAR(static_cast<double>(right) / n, 0.95, 0.01);
}

TEST(StochasticBackend, PureFunctionOfSeedTaskAndPrompt) {
  StochasticBackend g("g", "noisy-grade-assessor", Json{{"accuracy", 0.5}}, latents());
  const auto p = comparison_prompt("mid", "easy");
  std::vector<std::string> first;
  for (int i = 0; i < 50; ++i) first.push_back(g.query(p, {99, "task-" + std::to_string(i)}).text);
  std::vector<int> order(50);
  for (int i = 0; i < 50; ++i) order[i] = i;
  Rng rng(3);
  rng.shuffle(order);
  for (int i : order) EXPECT_EQ(g.query(p, {99, "task-" + std::to_string(i)}).text, first[i]);
}

TEST(StochasticBackend, GradeAssessorErrorSpread) {
  StochasticBackend g("g", "noisy-grade-assessor", Json{{"accuracy", 0.5}, {"spread_1", 0.7}}, latents());
  const auto p = comparison_prompt("mid", "easy");
  int exact = 0, off1 = 0, off2 = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const int err = std::abs(std::stoi(g.query(p, {1, "t" + std::to_string(i)}).text) - 6);
    exact += err == 0;
    off1 += err == 1;
    off2 += err == 2;
  }
  EXPECT_EQ(exact + off1 + off2, n);
  EXPECT_NEAR(exact / double(n), 0.5, 0.015);
  EXPECT_NEAR(off1 / double(n), 0.35, 0.015);
  EXPECT_NEAR(off2 / double(n), 0.15, 0.015);
}

TEST(StochasticBackend, GenreAssessorAtAccuracyOneIsExact) {
  StochasticBackend g("g", "noisy-genre-assessor", Json{{"accuracy", 1.0}}, latents());
  EXPECT_EQ(g.query(comparison_prompt("hard", "easy"), {1, "t"}).text, "poetry");
}

TEST(StochasticBackend, UnknownBehaviorIsAConfigurationError) {
  EXPECT_THROW(StochasticBackend("x", "oracle-of-delphi", Json::object(), latents()), ConfigurationError);
}

TEST(StochasticBackend, MissingLatentIsABackendError) {
  StochasticBackend c("c", "noisy-comparator", Json::object(), latents());
  EXPECT_THROW(c.query(comparison_prompt("hard", "nobody"), {1, "t"}), BackendError);
}

// ---------------------------------------------------------------------------
// HTTP backend against an in-process server.

class HttpBackendTest : public ::testing::Test {
 protected:
  void SetUp() override {
    unsetenv("AIOM_ENDPOINT");
    setenv("AIOM_TEST_KEY", "sekret", 1);
    server_.Post("/api/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      ++calls_;
      last_body_ = req.body;
      last_auth_ = req.get_header_value("Authorization");
      if (calls_ <= fail_first_) {
        res.status = fail_status_;
        return;
      }
      res.set_content(reply_, "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  void TearDown() override {
    server_.stop();
    thread_.join();
  }

  HttpBackend backend(int max_attempts = 3) {
    HttpBackendConfig c;
    c.endpoint = "http://127.0.0.1:" + std::to_string(port_) + "/api/";
    c.model = "test-model";
    c.api_key_env = "AIOM_TEST_KEY";
    c.max_attempts = max_attempts;
    c.backoff = std::chrono::milliseconds(1);
    c.timeout = std::chrono::milliseconds(2000);
    return HttpBackend("http:r", c);
  }

  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> calls_{0};
  int fail_first_ = 0;
  int fail_status_ = 500;
  std::string reply_ =
      R"({"choices":[{"message":{"role":"assistant","content":"seven"}}],"usage":{"prompt_tokens":5,"completion_tokens":1,"total_tokens":6}})";
  std::string last_body_;
  std::string last_auth_;
};

TEST_F(HttpBackendTest, RequestCarriesExactlyThePrompt) {
  const auto p = prompt_with("### DESCRIPTION\nGrade \"this\" é\n");
  const auto a = backend().query(p, {0, "t"});
  EXPECT_EQ(a.text, "seven");
  EXPECT_EQ(a.oracle_id, "http:r");
  EXPECT_EQ(a.meta.at("total_tokens"), "6");
  EXPECT_EQ(a.meta.at("attempts"), "1");
  const auto body = Json::parse(last_body_);
  EXPECT_EQ(body["model"], "test-model");
  EXPECT_EQ(body["temperature"], 0.0);
  ASSERT_EQ(body["messages"].size(), 1u);
  EXPECT_EQ(body["messages"][0]["role"], "user");
  EXPECT_EQ(body["messages"][0]["content"], p.rendered_text);
  EXPECT_EQ(last_auth_, "Bearer sekret");
}

TEST_F(HttpBackendTest, RetriesServerErrorsThenSucceeds) {
  fail_first_ = 2;
  const auto a = backend().query(prompt_with("x"), {0, "t"});
  EXPECT_EQ(a.text, "seven");
  EXPECT_EQ(calls_, 3);
  EXPECT_EQ(a.meta.at("attempts"), "3");
}

TEST_F(HttpBackendTest, RetryCountIsBounded) {
  fail_first_ = 100;
  fail_status_ = 429;
  try {
    backend(3).query(prompt_with("x"), {0, "t"});
    FAIL() << "expected BackendError";
  } catch (const BackendError& e) {
    EXPECT_TRUE(e.retryable());
  }
  EXPECT_EQ(calls_, 3);
}

TEST_F(HttpBackendTest, ClientErrorsAreNotRetried) {
  fail_first_ = 100;
  fail_status_ = 400;
  try {
    backend().query(prompt_with("x"), {0, "t"});
    FAIL() << "expected BackendError";
  } catch (const BackendError& e) {
    EXPECT_FALSE(e.retryable());
  }
  EXPECT_EQ(calls_, 1);
}

TEST_F(HttpBackendTest, MalformedBodyIsABackendError) {
  reply_ = R"({"choices":[]})";
  EXPECT_THROW(backend().query(prompt_with("x"), {0, "t"}), BackendError);
}

TEST(HttpBackendConfig, Validation) {
  unsetenv("AIOM_ENDPOINT");
  HttpBackendConfig c;
  c.model = "m";
  EXPECT_THROW(HttpBackend("h", c), ConfigurationError);  // no endpoint
  c.endpoint = "localhost:80";
  EXPECT_THROW(HttpBackend("h", c), ConfigurationError);  // not absolute
  c.endpoint = "http://localhost:1";
  c.temperature = 2.5;
  EXPECT_THROW(HttpBackend("h", c), ConfigurationError);
  EXPECT_THROW(HttpBackendConfig::from_params(Json{{"model", "m"}, {"temp", 1}}), SchemaError);
}

TEST(HttpBackendConfig, EndpointSplitting) {
  EXPECT_EQ(split_endpoint("http://h:8080/a/b/"), (std::pair<std::string, std::string>{"http://h:8080", "/a/b"}));
  EXPECT_EQ(split_endpoint("https://api.example.com"),
            (std::pair<std::string, std::string>{"https://api.example.com", ""}));
}

TEST(HttpBackendConfig, ConnectionFailureIsABackendError) {
  unsetenv("AIOM_ENDPOINT");
  HttpBackendConfig c;
  c.model = "m";
  c.endpoint = "http://127.0.0.1:1";
  c.timeout = std::chrono::milliseconds(500);
  EXPECT_THROW(HttpBackend("h", c).query(prompt_with("x"), {0, "t"}), BackendError);
}

}  // namespace
}  // namespace aiom
